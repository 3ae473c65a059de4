//! Intersection pairing and symplectic frames.
//!
//! A cohomology class with known values on every edge class restricts to an
//! affine (constant) 1-form on each triangle; the cup product of two classes
//! is the integral of the wedge of these piecewise-constant closed forms.
//! Tangential components agree across glued edges, so the forms are closed as
//! currents and the pairing is the topological one.

use crate::error::{Error, Result};
use crate::geom::{cross, C};
use crate::surface::{PeriodVector, TranslationSurface};

/// Constant coefficients (A, B) with f = A dx + B dy on one triangle.
fn form_coefficients(tri: &crate::surface::Triangle, f0: C, f1: C) -> (C, C) {
    let e0 = tri.edges[0];
    let e1 = tri.edges[1];
    let det = cross(e0, e1);
    let a = (f0 * e1.im - f1 * e0.im) / det;
    let b = (f1 * e0.re - f0 * e1.re) / det;
    (a, b)
}

/// Integral of f ^ g where both classes are given by complex values per edge
/// class (canonical direction).
pub fn wedge_on_classes(surface: &TranslationSurface, f: &[C], g: &[C]) -> C {
    let topo = &surface.topology;
    let mut total = C::new(0.0, 0.0);
    for (t, tri) in surface.triangles.iter().enumerate() {
        let val = |vals: &[C], e: usize| -> C {
            vals[topo.class_of[t][e]] * topo.sign_of[t][e] as f64
        };
        let (af, bf) = form_coefficients(tri, val(f, 0), val(f, 1));
        let (ag, bg) = form_coefficients(tri, val(g, 0), val(g, 1));
        total += (af * bg - bf * ag) * tri.signed_area();
    }
    total
}

/// Values of a basis-coordinate cohomology vector on every edge class.
pub fn class_values(surface: &TranslationSurface, v: &PeriodVector) -> Vec<C> {
    (0..surface.topology.n_classes).map(|c| surface.evaluate_on_class(v, c)).collect()
}

/// Wedge pairing of two basis-coordinate vectors. Factors through absolute
/// cohomology; on real vectors this is the symplectic intersection pairing.
pub fn wedge(surface: &TranslationSurface, f: &PeriodVector, g: &PeriodVector) -> C {
    wedge_on_classes(surface, &class_values(surface, f), &class_values(surface, g))
}

fn real_vector(vals: &[f64]) -> PeriodVector {
    PeriodVector { coords: vals.iter().map(|&x| C::new(x, 0.0)).collect() }
}

/// Integer intersection matrix of the dual basis classes. The entries are
/// topological integers; the float computation is rounded and checked.
pub fn intersection_matrix(surface: &TranslationSurface) -> Result<Vec<Vec<i64>>> {
    let n = surface.homology_dim();
    let mut duals = Vec::with_capacity(n);
    for k in 0..n {
        let mut v = vec![0.0; n];
        v[k] = 1.0;
        duals.push(class_values(surface, &real_vector(&v)));
    }
    let mut j = vec![vec![0i64; n]; n];
    for p in 0..n {
        for q in 0..n {
            let w = wedge_on_classes(surface, &duals[p], &duals[q]).re;
            let r = w.round();
            if (w - r).abs() > 1e-6 {
                return Err(Error::Invalid(format!(
                    "intersection number ({p},{q}) = {w} is not near an integer"
                )));
            }
            j[p][q] = r as i64;
        }
    }
    Ok(j)
}

fn pair(j: &[Vec<i64>], x: &[i64], y: &[i64]) -> i64 {
    let n = j.len();
    let mut acc = 0i64;
    for p in 0..n {
        if x[p] == 0 {
            continue;
        }
        for q in 0..n {
            acc += x[p] * j[p][q] * y[q];
        }
    }
    acc
}

fn axpy(dst: &mut [i64], c: i64, src: &[i64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += c * s;
    }
}

/// Integer symplectic basis (a1, b1, a2, b2, ...) for a unimodular skew form.
pub fn symplectic_basis(j: &[Vec<i64>]) -> Result<Vec<Vec<i64>>> {
    let n = j.len();
    if n % 2 != 0 {
        return Err(Error::Invalid("skew form has odd rank".into()));
    }
    let mut generators: Vec<Vec<i64>> = (0..n)
        .map(|k| {
            let mut v = vec![0i64; n];
            v[k] = 1;
            v
        })
        .collect();
    let mut out = Vec::new();
    while !generators.is_empty() {
        // pick a with a partner of minimal positive pairing, then run Euclid
        // until the pairing reaches 1 (the form is unimodular on the
        // saturated complement at every stage).
        let mut best: Option<(usize, usize, i64)> = None;
        for p in 0..generators.len() {
            for q in 0..generators.len() {
                let v = pair(j, &generators[p], &generators[q]);
                if v != 0 && best.map(|(_, _, b)| v.abs() < b.abs()).unwrap_or(true) {
                    best = Some((p, q, v));
                }
            }
        }
        let Some((pa, pb, mut v)) = best else {
            return Err(Error::Invalid("intersection form is degenerate".into()));
        };
        let mut a = generators[pa].clone();
        let mut b = generators[pb].clone();
        // Euclid against the other generators until the pairing is +-1.
        'reduce: while v.abs() > 1 {
            for g in &generators {
                let w = pair(j, &a, g);
                if w % v != 0 {
                    // replace b by the gcd combination
                    let (mut x, mut y, mut r0, mut r1) = (v, w, b.clone(), g.clone());
                    while y != 0 {
                        let q = x.div_euclid(y);
                        let mut nr = r0.clone();
                        axpy(&mut nr, -q, &r1);
                        let nx = x - q * y;
                        x = y;
                        y = nx;
                        r0 = r1;
                        r1 = nr;
                    }
                    b = r0;
                    v = x;
                    continue 'reduce;
                }
            }
            // try improving through a instead
            let mut improved = false;
            for g in &generators {
                let w = pair(j, g, &b);
                if w % v != 0 {
                    let (mut x, mut y, mut r0, mut r1) = (v, w, a.clone(), g.clone());
                    while y != 0 {
                        let q = x.div_euclid(y);
                        let mut nr = r0.clone();
                        axpy(&mut nr, -q, &r1);
                        let nx = x - q * y;
                        x = y;
                        y = nx;
                        r0 = r1;
                        r1 = nr;
                    }
                    a = r0;
                    v = x;
                    improved = true;
                    break;
                }
            }
            if !improved {
                return Err(Error::Invalid(format!(
                    "skew form is not unimodular (elementary divisor {v})"
                )));
            }
        }
        if v == -1 {
            for x in b.iter_mut() {
                *x = -*x;
            }
        }
        // project the remaining generators onto the symplectic complement
        let mut next = Vec::new();
        for g in &generators {
            let mut c = g.clone();
            let cb = pair(j, &c, &b);
            let ac = pair(j, &a, &c);
            axpy(&mut c, -cb, &a);
            axpy(&mut c, -ac, &b);
            debug_assert_eq!(pair(j, &a, &c), 0);
            debug_assert_eq!(pair(j, &b, &c), 0);
            if c.iter().any(|&x| x != 0) {
                next.push(c);
            }
        }
        // keep an independent spanning subset (n small; Gauss over rationals)
        generators = independent_subset(next);
        out.push((a, b));
    }
    let mut basis = Vec::new();
    for (a, b) in out {
        basis.push(a);
        basis.push(b);
    }
    Ok(basis)
}

fn independent_subset(rows: Vec<Vec<i64>>) -> Vec<Vec<i64>> {
    let mut kept: Vec<Vec<i64>> = Vec::new();
    let mut reduced: Vec<Vec<f64>> = Vec::new();
    for row in rows {
        let mut r: Vec<f64> = row.iter().map(|&x| x as f64).collect();
        for k in &reduced {
            let pivot = k.iter().position(|&x| x.abs() > 1e-9).unwrap();
            let f = r[pivot] / k[pivot];
            for (a, b) in r.iter_mut().zip(k) {
                *a -= f * b;
            }
        }
        if r.iter().any(|&x| x.abs() > 1e-6) {
            reduced.push(r);
            kept.push(row);
        }
    }
    kept
}

/// Symplectic frame of a surface: the intersection matrix on the homology
/// basis together with an integer symplectic basis for it, oriented so that
/// the cohomological area of the surface comes out positive.
#[derive(Debug, Clone)]
pub struct HomologyFrame {
    pub intersection: Vec<Vec<i64>>,
    /// rows a1, b1, a2, b2, ... in homology-basis coordinates
    pub symplectic: Vec<Vec<i64>>,
}

impl HomologyFrame {
    pub fn new(surface: &TranslationSurface) -> Result<HomologyFrame> {
        let j = intersection_matrix(surface)?;
        let mut basis = symplectic_basis(&j)?;
        let mut frame = HomologyFrame { intersection: j, symplectic: basis.clone() };
        if frame.cohomological_area(surface, &surface.periods()) < 0.0 {
            for pair in basis.chunks_mut(2) {
                pair.swap(0, 1);
            }
            frame.symplectic = basis;
        }
        Ok(frame)
    }

    /// Coordinates over the homology basis of the cycle Poincare-dual to a
    /// combination of dual-basis cochains: the intersection matrix performs
    /// the duality twist.
    fn cycle_coords(&self, row: &[i64]) -> Vec<i64> {
        let n = row.len();
        (0..n)
            .map(|l| (0..n).map(|k| row[k] * self.intersection[k][l]).sum())
            .collect()
    }

    /// (i/2) sum_j (A_j conj(B_j) - B_j conj(A_j)) over the symplectic basis.
    pub fn cohomological_area(&self, surface: &TranslationSurface, omega: &PeriodVector) -> f64 {
        let mut total = 0.0;
        for pair in self.symplectic.chunks(2) {
            let a = surface.evaluate_on_cycle(omega, &self.cycle_coords(&pair[0]));
            let b = surface.evaluate_on_cycle(omega, &self.cycle_coords(&pair[1]));
            // (i/2)(a conj(b) - b conj(a)) = Im(conj(a) b)
            total += (a.conj() * b).im;
        }
        total
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surface::square_torus;

    #[test]
    fn torus_wedge_is_unimodular() {
        let s = square_torus();
        let j = intersection_matrix(&s).unwrap();
        assert_eq!(j.len(), 2);
        assert_eq!(j[0][0], 0);
        assert_eq!(j[1][1], 0);
        assert_eq!(j[0][1].abs(), 1);
        assert_eq!(j[1][0], -j[0][1]);
    }

    #[test]
    fn torus_cohomological_area_matches() {
        let s = square_torus();
        let frame = HomologyFrame::new(&s).unwrap();
        let area = frame.cohomological_area(&s, &s.periods());
        assert!((area - s.area()).abs() < 1e-9);
    }

    #[test]
    fn sheared_torus_area_matches() {
        let s = square_torus().apply_gl2(&crate::geom::Mat2::new(1.3, 0.4, 0.1, 0.9)).unwrap();
        let frame = HomologyFrame::new(&s).unwrap();
        let area = frame.cohomological_area(&s, &s.periods());
        assert!((area - s.area()).abs() < 1e-9);
    }

    #[test]
    fn symplectic_basis_determinant_one() {
        let j = vec![
            vec![0, 1, 0, 0],
            vec![-1, 0, 1, 0],
            vec![0, -1, 0, 1],
            vec![0, 0, -1, 0],
        ];
        let basis = symplectic_basis(&j).unwrap();
        assert_eq!(basis.len(), 4);
        for (k, a) in basis.iter().enumerate() {
            for (l, b) in basis.iter().enumerate() {
                let v = pair(&j, a, b);
                let want = match (k / 2 == l / 2, k % 2, l % 2) {
                    (true, 0, 1) => 1,
                    (true, 1, 0) => -1,
                    _ => 0,
                };
                assert_eq!(v, want, "pairing of {k},{l}");
            }
        }
    }
}
