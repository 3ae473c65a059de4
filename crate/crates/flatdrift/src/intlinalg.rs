//! Exact integer linear algebra: Hermite reduction, saturated kernels,
//! subspace heights and the common-fixed-subspace solver.

use crate::error::{Error, Result};
use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{Signed, Zero};

pub type BigMatrix = Vec<Vec<BigInt>>;

pub fn big_matrix(rows: &[Vec<i64>]) -> BigMatrix {
    rows.iter().map(|r| r.iter().map(|&v| BigInt::from(v)).collect()).collect()
}

/// Row-style Hermite normal form: pivots positive, entries above pivots
/// reduced, zero rows dropped. Deterministic canonical representative oft
/// the row lattice.
pub fn hnf(mut m: BigMatrix) -> BigMatrix {
    if m.is_empty() {
        return m;
    }
    let ncols = m[0].len();
    let mut row = 0;
    for col in 0..ncols {
        if row >= m.len() {
            break;
        }
        // euclid down the column
        loop {
            let mut best: Option<(usize, BigInt)> = None;
            for r in row..m.len() {
                if !m[r][col].is_zero() {
                    let a = m[r][col].abs();
                    if best.as_ref().map(|(_, b)| a < *b).unwrap_or(true) {
                        best = Some((r, a));
                    }
                }
            }
            let Some((pr, _)) = best else { break };
            m.swap(row, pr);
            let mut all_zero = true;
            for r in row + 1..m.len() {
                if m[r][col].is_zero() {
                    continue;
                }
                let q = div_floor_big(&m[r][col], &m[row][col]);
                if !q.is_zero() {
                    for c in 0..ncols {
                        let sub = &q * &m[row][c];
                        m[r][c] -= sub;
                    }
                }
                if !m[r][col].is_zero() {
                    all_zero = false;
                }
            }
            if all_zero {
                break;
            }
        }
        if m[row][col].is_zero() {
            continue;
        }
        if m[row][col].is_negative() {
            for c in 0..ncols {
                m[row][c] = -m[row][c].clone();
            }
        }
        // reduce entries above the pivot
        for r in 0..row {
            let q = div_floor_big(&m[r][col], &m[row][col]);
            if !q.is_zero() {
                for c in 0..ncols {
                    let sub = &q * &m[row][c];
                    m[r][c] -= sub;
                }
            }
        }
        row += 1;
    }
    m.truncate(row);
    m
}

fn div_floor_big(a: &BigInt, b: &BigInt) -> BigInt {
    a.div_floor(b)
}

/// Saturated basis of {v in Z^n : v * A = 0} via unimodular row reduction of
/// the augmented matrix [A | I].
pub fn integer_kernel(a: &BigMatrix, n_rows: usize, n_cols: usize) -> BigMatrix {
    let mut aug: BigMatrix = Vec::with_capacity(n_rows);
    for i in 0..n_rows {
        let mut row: Vec<BigInt> = a[i].clone();
        assert_eq!(row.len(), n_cols);
        for j in 0..n_rows {
            row.push(BigInt::from((i == j) as i64));
        }
        aug.push(row);
    }
    // eliminate the A-part by integer row operations only
    let mut row = 0;
    for col in 0..n_cols {
        loop {
            let mut best: Option<(usize, BigInt)> = None;
            for r in row..n_rows {
                if !aug[r][col].is_zero() {
                    let v = aug[r][col].abs();
                    if best.as_ref().map(|(_, b)| v < *b).unwrap_or(true) {
                        best = Some((r, v));
                    }
                }
            }
            let Some((pr, _)) = best else { break };
            aug.swap(row, pr);
            let mut done = true;
            for r in row + 1..n_rows {
                if aug[r][col].is_zero() {
                    continue;
                }
                let q = div_floor_big(&aug[r][col], &aug[row][col]);
                for c in 0..n_cols + n_rows {
                    let sub = &q * &aug[row][c];
                    aug[r][c] -= sub;
                }
                if !aug[r][col].is_zero() {
                    done = false;
                }
            }
            if done {
                break;
            }
        }
        if row < n_rows && !aug[row][col].is_zero() {
            row += 1;
        }
    }
    let mut kernel = Vec::new();
    for r in row..n_rows {
        if aug[r][..n_cols].iter().all(|x| x.is_zero()) {
            kernel.push(aug[r][n_cols..].to_vec());
        }
    }
    hnf(kernel)
}

/// gcd of all maximal minors; equals 1 exactly when the row lattice is
/// saturated in Z^n.
pub fn saturation_index(basis: &BigMatrix) -> BigInt {
    let k = basis.len();
    if k == 0 {
        return BigInt::from(1);
    }
    let n = basis[0].len();
    let mut cols: Vec<usize> = (0..k).collect();
    let mut g = BigInt::from(0);
    loop {
        let mut sub: BigMatrix = Vec::with_capacity(k);
        for row in basis {
            sub.push(cols.iter().map(|&c| row[c].clone()).collect());
        }
        g = g.gcd(&det_bareiss(&sub));
        // next k-combination of 0..n
        let mut i = k;
        loop {
            if i == 0 {
                return g;
            }
            i -= 1;
            if cols[i] != i + n - k {
                cols[i] += 1;
                for j in i + 1..k {
                    cols[j] = cols[j - 1] + 1;
                }
                break;
            }
        }
    }
}

pub fn det_bareiss(a: &BigMatrix) -> BigInt {
    let n = a.len();
    if n == 0 {
        return BigInt::from(1);
    }
    let mut m = a.clone();
    let mut denom = BigInt::from(1);
    let mut sign = BigInt::from(1);
    for k in 0..n {
        if m[k][k].is_zero() {
            let Some(p) = (k + 1..n).find(|&r| !m[r][k].is_zero()) else {
                return BigInt::from(0);
            };
            m.swap(k, p);
            sign = -sign;
        }
        for i in k + 1..n {
            for j in k + 1..n {
                let v = (&m[i][j] * &m[k][k] - &m[i][k] * &m[k][j]) / &denom;
                m[i][j] = v;
            }
        }
        denom = m[k][k].clone();
    }
    sign * m[n - 1][n - 1].clone()
}

/// A saturated integral subspace of Z^n, basis in Hermite normal form.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntegralSubspace {
    pub basis: BigMatrix,
    pub ambient_dim: usize,
}

impl IntegralSubspace {
    pub fn from_rows(rows: BigMatrix, ambient_dim: usize) -> Result<IntegralSubspace> {
        let basis = hnf(rows);
        let sub = IntegralSubspace { basis, ambient_dim };
        let idx = saturation_index(&sub.basis);
        if idx != BigInt::from(1) {
            let index = idx.to_string().parse::<u64>().unwrap_or(u64::MAX);
            return Err(Error::NotSaturated { index });
        }
        Ok(sub)
    }

    pub fn full(n: usize) -> IntegralSubspace {
        let basis = (0..n)
            .map(|i| (0..n).map(|j| BigInt::from((i == j) as i64)).collect())
            .collect();
        IntegralSubspace { basis, ambient_dim: n }
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    /// Covolume of the lattice in the wedge norm: sqrt(det(B B^T)).
    pub fn height(&self) -> f64 {
        if self.basis.is_empty() {
            return 1.0;
        }
        let k = self.basis.len();
        let mut gram: BigMatrix = vec![vec![BigInt::from(0); k]; k];
        for i in 0..k {
            for j in 0..k {
                let mut acc = BigInt::from(0);
                for c in 0..self.ambient_dim {
                    acc += &self.basis[i][c] * &self.basis[j][c];
                }
                gram[i][j] = acc;
            }
        }
        let det = det_bareiss(&gram);
        det.to_string().parse::<f64>().map(|d| d.sqrt()).unwrap_or(f64::INFINITY)
    }
}

/// v -> v * M for a row vector.
fn row_times(v: &[BigInt], m: &BigMatrix) -> Vec<BigInt> {
    let ncols = m[0].len();
    let mut out = vec![BigInt::from(0); ncols];
    for (i, vi) in v.iter().enumerate() {
        if vi.is_zero() {
            continue;
        }
        for j in 0..ncols {
            out[j] += vi * &m[i][j];
        }
    }
    out
}

/// Common row-fixed subspace W = {v : v M = v for all M} together with a
/// minimal witness subset whose fixed space already equals W, found by the
/// dimension-drop scan. The witness is empty when every matrix acts trivially
/// on the full space.
pub fn common_fixed_subspace(ms: &[Vec<Vec<i64>>]) -> Result<(IntegralSubspace, Vec<usize>)> {
    if ms.is_empty() {
        return Err(Error::Invalid("no matrices supplied".into()));
    }
    let n = ms[0].len();
    for m in ms {
        if m.len() != n || m.iter().any(|r| r.len() != n) {
            return Err(Error::Invalid("matrices must be square and equal-sized".into()));
        }
    }
    let mut current = IntegralSubspace::full(n);
    let mut witness = Vec::new();
    for (idx, m) in ms.iter().enumerate() {
        if current.dim() == 0 {
            break;
        }
        // constraint in current coordinates: c * (B (M - I)) = 0
        let mb = big_matrix(m);
        let k = current.dim();
        let mut constraint: BigMatrix = Vec::with_capacity(k);
        for b in &current.basis {
            let mut row = row_times(b, &mb);
            for (x, y) in row.iter_mut().zip(b) {
                *x -= y;
            }
            constraint.push(row);
        }
        if constraint.iter().all(|r| r.iter().all(|x| x.is_zero())) {
            continue;
        }
        let coord_kernel = integer_kernel(&constraint, k, n);
        let new_basis: BigMatrix =
            coord_kernel.iter().map(|c| row_times(c, &current.basis)).collect();
        current = IntegralSubspace { basis: hnf(new_basis), ambient_dim: n };
        witness.push(idx);
    }
    Ok((current, witness))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sub(rows: &[Vec<i64>], n: usize) -> IntegralSubspace {
        IntegralSubspace::from_rows(big_matrix(rows), n).unwrap()
    }

    #[test]
    fn height_of_coordinate_plane() {
        let s = sub(&[vec![1, 0, 0], vec![0, 1, 0]], 3);
        assert!((s.height() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn height_of_line() {
        let s = sub(&[vec![1, 2, 3]], 3);
        assert!((s.height() - 14f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn height_invariant_under_unimodular_row_ops() {
        let a = sub(&[vec![1, 2, 3], vec![0, 1, 5]], 3);
        let b = sub(&[vec![1, 3, 8], vec![1, 2, 3]], 3); // row ops of the same lattice
        assert!((a.height() - b.height()).abs() < 1e-12);
        assert_eq!(a.basis, b.basis);
    }

    #[test]
    fn unsaturated_basis_rejected() {
        let err = IntegralSubspace::from_rows(big_matrix(&[vec![2, 0], vec![0, 2]]), 2)
            .unwrap_err();
        assert!(matches!(err, Error::NotSaturated { index: 4 }));
    }

    #[test]
    fn kernel_is_saturated() {
        // v * (2, 4)^T = 0 over Z^2: kernel spanned by (2, -1)
        let a = big_matrix(&[vec![2], vec![4]]);
        let k = integer_kernel(&a, 2, 1);
        assert_eq!(k.len(), 1);
        let v: Vec<i64> = k[0].iter().map(|x| x.to_string().parse().unwrap()).collect();
        assert_eq!(2 * v[0] + 4 * v[1], 0);
        assert_eq!(v.iter().map(|x| x.abs()).fold(0, |a, b| a.gcd(&b)), 1);
    }

    #[test]
    fn fixed_space_of_identity_is_everything() {
        let id = vec![vec![1, 0], vec![0, 1]];
        let (w, witness) = common_fixed_subspace(&[id]).unwrap();
        assert_eq!(w.dim(), 2);
        assert!(witness.is_empty());
    }

    #[test]
    fn fixed_space_of_unipotent_row_convention() {
        // v [[1,1],[0,1]] = v forces v1 = 0: span{(0,1)}
        let m = vec![vec![1, 1], vec![0, 1]];
        let (w, witness) = common_fixed_subspace(&[m]).unwrap();
        assert_eq!(w.dim(), 1);
        assert_eq!(w.basis[0], vec![BigInt::from(0), BigInt::from(1)]);
        assert_eq!(witness, vec![0]);
    }

    #[test]
    fn generic_pair_in_sl4_has_trivial_fixed_space() {
        let m1 = vec![
            vec![2, 1, 0, 0],
            vec![1, 1, 0, 0],
            vec![0, 0, 1, 1],
            vec![0, 0, 1, 2],
        ];
        let m2 = vec![
            vec![1, 0, 1, 0],
            vec![0, 1, 0, 1],
            vec![1, 0, 2, 0],
            vec![0, 1, 0, 2],
        ];
        let (w, witness) = common_fixed_subspace(&[m1.clone(), m2.clone()]).unwrap();
        assert_eq!(w.dim(), 0);
        assert!(witness.len() <= 2);
        // the witness subset reproduces the same fixed space
        let ws: Vec<_> = witness.iter().map(|&i| [m1.clone(), m2.clone()][i].clone()).collect();
        let (w2, _) = common_fixed_subspace(&ws).unwrap();
        assert_eq!(w.basis, w2.basis);
    }

    #[test]
    fn hnf_is_canonical() {
        let a = hnf(big_matrix(&[vec![2, 4, 4], vec![-6, 6, 12], vec![10, 4, 16]]));
        let b = hnf(a.clone());
        assert_eq!(a, b);
    }
}
