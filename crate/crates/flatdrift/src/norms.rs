//! AGY norms, the tautological/balance splitting, injectivity scales and the
//! lower-diagonal-upper boxes in SL2(R).

use crate::error::{Error, Result};
use crate::geom::{C, Mat2};
use crate::homology;
use crate::saddle::{saddle_connections_capped, systole};
use crate::surface::{PeriodVector, TranslationSurface};

/// Result of an AGY-norm evaluation: the sup of |c(gamma)| / |hol(gamma)|
/// over saddle connections up to the cutoff, plus a certificate that doubling
/// the cutoff moved the value by less than 1e-6. `complete` is false when the
/// enumeration hit its budget, in which case the value is the partial sup (a
/// lower bound).
#[derive(Debug, Clone, Copy)]
pub struct AgyNorm {
    pub value: f64,
    pub stabilized: bool,
    pub complete: bool,
}

/// Default cutoff: max(10, 4/systole).
pub fn default_cutoff(s: &TranslationSurface) -> f64 {
    (4.0 / systole(s)).max(10.0)
}

pub fn agy_norm(s: &TranslationSurface, c: &PeriodVector, cutoff: f64, budget: usize) -> AgyNorm {
    let sup_upto = |bound: f64| -> (f64, bool) {
        let (list, complete) = saddle_connections_capped(s, bound, budget);
        let mut sup: f64 = 0.0;
        for sc in &list {
            let val = s.evaluate_on_cycle(c, &sc.class).norm() / sc.holonomy.norm();
            sup = sup.max(val);
        }
        (sup, complete)
    };
    let (value, complete) = sup_upto(cutoff);
    if !complete {
        return AgyNorm { value, stabilized: false, complete };
    }
    let (value2, complete2) = sup_upto(2.0 * cutoff);
    AgyNorm {
        value: value.max(value2),
        stabilized: complete2 && (value2 - value).abs() < 1e-6,
        complete: true,
    }
}

/// Partial sups of many cohomology vectors over one saddle-connection
/// enumeration (no doubling spot-check); the flag reports completeness of
/// the single enumeration.
pub fn agy_norms_bulk(
    s: &TranslationSurface,
    cs: &[PeriodVector],
    cutoff: f64,
    budget: usize,
) -> (Vec<f64>, bool) {
    let (list, complete) = saddle_connections_capped(s, cutoff, budget);
    let mut sups = vec![0.0f64; cs.len()];
    for sc in &list {
        let hol = sc.holonomy.norm();
        for (k, c) in cs.iter().enumerate() {
            let val = s.evaluate_on_cycle(c, &sc.class).norm() / hol;
            if val > sups[k] {
                sups[k] = val;
            }
        }
    }
    (sups, complete)
}

/// Splitting of H^1 at a surface: the tautological plane spanned by Re x and
/// Im x, and the balance space, the wedge-annihilator of both.
#[derive(Debug, Clone)]
pub struct Splitting {
    pub re_class: Vec<f64>,
    pub im_class: Vec<f64>,
    /// real basis of the balance space, dimension 2g + |Sigma| - 3 ... -2
    pub hperp_basis: Vec<Vec<f64>>,
    /// 2 x n pairing matrix of (Re x, Im x) against the dual basis
    pub pairing: Vec<Vec<f64>>,
    /// the symplectic area wedge(Re x, Im x)
    pub sym_area: f64,
}

fn real_pv(v: &[f64]) -> PeriodVector {
    PeriodVector { coords: v.iter().map(|&x| C::new(x, 0.0)).collect() }
}

pub fn splitting(s: &TranslationSurface) -> Result<Splitting> {
    let p = s.periods();
    let re: Vec<f64> = p.real_part();
    let im: Vec<f64> = p.imag_part();
    let n = p.dim();
    let sym_area = homology::wedge(s, &real_pv(&re), &real_pv(&im)).re;
    if sym_area.abs() < 1e-12 {
        return Err(Error::DegeneratePlane { area: sym_area });
    }
    let mut pairing = vec![vec![0.0; n], vec![0.0; n]];
    for k in 0..n {
        let mut delta = vec![0.0; n];
        delta[k] = 1.0;
        pairing[0][k] = homology::wedge(s, &real_pv(&re), &real_pv(&delta)).re;
        pairing[1][k] = homology::wedge(s, &real_pv(&im), &real_pv(&delta)).re;
    }
    // nullspace of the 2 x n pairing matrix by Gaussian elimination
    let mut m = pairing.clone();
    let mut pivots = Vec::new();
    let mut row = 0;
    for col in 0..n {
        let (best, mag) = (row..2)
            .map(|r| (r, m[r][col].abs()))
            .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
            .unwrap_or((row, 0.0));
        if mag < 1e-12 {
            continue;
        }
        m.swap(row, best);
        let pv = m[row][col];
        for x in m[row].iter_mut() {
            *x /= pv;
        }
        for r in 0..2 {
            if r != row {
                let f = m[r][col];
                for cc in 0..n {
                    m[r][cc] -= f * m[row][cc];
                }
            }
        }
        pivots.push(col);
        row += 1;
        if row == 2 {
            break;
        }
    }
    let mut hperp_basis = Vec::new();
    for free in 0..n {
        if pivots.contains(&free) {
            continue;
        }
        let mut v = vec![0.0; n];
        v[free] = 1.0;
        for (r, &pc) in pivots.iter().enumerate() {
            v[pc] = -m[r][free];
        }
        hperp_basis.push(v);
    }
    Ok(Splitting { re_class: re, im_class: im, hperp_basis, pairing, sym_area })
}

/// Component of v in the complexified balance space along the decomposition
/// C(Re x) + C(Im x) + Hperp_C. Projecting twice is the identity.
pub fn project_balance(s: &TranslationSurface, v: &PeriodVector) -> Result<PeriodVector> {
    let p = s.periods();
    let re = real_pv(&p.real_part());
    let im = real_pv(&p.imag_part());
    let area = homology::wedge(s, &re, &im).re;
    if area.abs() < 1e-12 {
        return Err(Error::DegeneratePlane { area });
    }
    // wedge(Re, v) = beta * area, wedge(Im, v) = -alpha * area
    let beta = homology::wedge(s, &re, v) / area;
    let alpha = -homology::wedge(s, &im, v) / area;
    let coords: Vec<C> = (0..v.dim())
        .map(|k| v.coords[k] - alpha * re.coords[k].re - beta * im.coords[k].re)
        .collect();
    Ok(PeriodVector { coords })
}

/// Tautological component (the complement of the balance projection).
pub fn tautological_part(s: &TranslationSurface, v: &PeriodVector) -> Result<(C, C)> {
    let p = s.periods();
    let re = real_pv(&p.real_part());
    let im = real_pv(&p.imag_part());
    let area = homology::wedge(s, &re, &im).re;
    if area.abs() < 1e-12 {
        return Err(Error::DegeneratePlane { area });
    }
    let beta = homology::wedge(s, &re, v) / area;
    let alpha = -homology::wedge(s, &im, v) / area;
    Ok((alpha, beta))
}

/// systole^kappa6, the local injectivity scale L(z).
pub fn injectivity_scale(s: &TranslationSurface, kappa6: f64) -> f64 {
    systole(s).powf(kappa6)
}

/// Factor det-1 g with nonzero upper-left entry as
/// lower(c/a) * diag(a, 1/a) * upper(b/a).
pub fn qgu_factor(g: &Mat2) -> Result<(f64, f64, f64)> {
    if g.a.abs() < 1e-300 {
        return Err(Error::ZeroCorner);
    }
    Ok((g.c / g.a, g.a, g.b / g.a))
}

/// The box ubar_[-delta/tau, delta/tau] * a_[-delta, delta] * u_[-delta, delta].
#[derive(Debug, Clone, Copy)]
pub struct QBox {
    pub delta: f64,
    pub tau: f64,
}

impl QBox {
    pub fn new(delta: f64, tau: f64) -> QBox {
        assert!(delta > 0.0 && tau >= 1.0);
        QBox { delta, tau }
    }

    /// Membership through the factorization identity.
    pub fn contains(&self, g: &Mat2) -> bool {
        if (g.det() - 1.0).abs() > 1e-9 {
            return false;
        }
        let Ok((s, a, r)) = qgu_factor(g) else { return false };
        if a <= 0.0 {
            return false;
        }
        let t = 2.0 * a.ln();
        s.abs() <= self.delta / self.tau + 1e-12
            && t.abs() <= self.delta + 1e-12
            && r.abs() <= self.delta + 1e-12
    }

    /// The matrix ubar_s a_t u_r for box coordinates (s, t, r).
    pub fn element(s: f64, t: f64, r: f64) -> Mat2 {
        Mat2::opposite_horocycle(s).mul(&Mat2::geodesic(t)).mul(&Mat2::horocycle(r))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prototypes::{prototype_surface, Prototype};
    use crate::surface::square_torus;

    #[test]
    fn own_class_has_norm_one() {
        let s = square_torus();
        let p = s.periods();
        let norm = agy_norm(&s, &p, default_cutoff(&s), 1_000_000);
        assert!((norm.value - 1.0).abs() < 1e-12);
        assert!(norm.stabilized);
        // multiplying by i leaves the modulus unchanged
        let ip = PeriodVector { coords: p.coords.iter().map(|c| c * C::new(0.0, 1.0)).collect() };
        let norm_i = agy_norm(&s, &ip, default_cutoff(&s), 1_000_000);
        assert!((norm_i.value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn random_class_matches_bruteforce_on_d8() {
        let p = Prototype { a: 0, b: 2, c: 1, e: 0 };
        let (_, sum) = prototype_surface(&p).unwrap();
        let s = sum.surface;
        let mut c = PeriodVector::zero(4);
        // a fixed deterministic "random" class
        c.coords = vec![C::new(0.3, -0.7), C::new(1.1, 0.2), C::new(-0.5, 0.9), C::new(0.05, 0.4)];
        // brute-force oracle over all connections of length <= 10
        let list = crate::saddle::saddle_connections(&s, 10.0, 5_000_000).unwrap();
        assert!(!list.is_empty());
        let oracle = list
            .iter()
            .map(|sc| s.evaluate_on_cycle(&c, &sc.class).norm() / sc.holonomy.norm())
            .fold(0.0f64, f64::max);
        let norm = agy_norm(&s, &c, 10.0, 5_000_000);
        assert!((norm.value - oracle).abs() < 1e-12);
    }

    #[test]
    fn splitting_dimensions() {
        let p = Prototype { a: 0, b: 2, c: 1, e: 0 };
        let (_, sum) = prototype_surface(&p).unwrap();
        let sp = splitting(&sum.surface).unwrap();
        assert_eq!(sp.hperp_basis.len(), 2);
        // pairing of each balance vector with Re and Im vanishes
        for v in &sp.hperp_basis {
            let pv = real_pv(v);
            let re = real_pv(&sp.re_class);
            let im = real_pv(&sp.im_class);
            assert!(homology::wedge(&sum.surface, &re, &pv).norm() < 1e-9);
            assert!(homology::wedge(&sum.surface, &im, &pv).norm() < 1e-9);
        }
    }

    #[test]
    fn torus_balance_space_is_trivial() {
        let s = square_torus();
        let sp = splitting(&s).unwrap();
        assert!(sp.hperp_basis.is_empty());
    }

    #[test]
    fn degenerate_plane_detected() {
        // a torus squashed onto the real axis has symplectic area 0 in the
        // pairing sense; fabricate it through rebuild failure instead:
        // period data with Im = multiple of Re gives area 0
        let s = square_torus();
        let mut p = s.periods();
        for c in p.coords.iter_mut() {
            *c = C::new(c.re + c.im, 0.1 * (c.re + c.im));
        }
        match s.rebuild_from_periods(&p) {
            Ok(sq) => {
                assert!(matches!(splitting(&sq), Err(Error::DegeneratePlane { .. })));
            }
            Err(_) => {
                // collapse already rejected: equally fine for this check
            }
        }
    }

    #[test]
    fn projection_properties_on_d8() {
        let p = Prototype { a: 0, b: 2, c: 1, e: 0 };
        let (_, sum) = prototype_surface(&p).unwrap();
        let s = &sum.surface;
        let periods = s.periods();
        // projecting Re x gives zero
        let re = real_pv(&periods.real_part());
        let proj = project_balance(s, &re).unwrap();
        assert!(proj.norm_sup() < 1e-9);
        // idempotence and residual pairing on a generic vector
        let v = PeriodVector {
            coords: vec![C::new(0.2, 1.0), C::new(-0.4, 0.3), C::new(0.9, -0.1), C::new(0.0, 0.7)],
        };
        let w = project_balance(s, &v).unwrap();
        let w2 = project_balance(s, &w).unwrap();
        assert!(w.sub(&w2).norm_sup() < 1e-9);
        let im = real_pv(&periods.imag_part());
        assert!(homology::wedge(s, &re, &w).norm() < 1e-9);
        assert!(homology::wedge(s, &im, &w).norm() < 1e-9);
    }

    #[test]
    fn injectivity_scale_values() {
        let s = square_torus();
        assert!((injectivity_scale(&s, 3.0) - 1.0).abs() < 1e-12);
        let half = s.apply_gl2(&Mat2::new(0.5, 0.0, 0.0, 0.5)).unwrap();
        assert!((injectivity_scale(&half, 3.0) - 0.125).abs() < 1e-12);
    }

    #[test]
    fn qgu_examples() {
        let (s, a, r) = qgu_factor(&Mat2::IDENTITY).unwrap();
        assert_eq!((s, a, r), (0.0, 1.0, 0.0));
        let g = Mat2::new(2.0, 1.0, 1.0, 1.0);
        let (s, a, r) = qgu_factor(&g).unwrap();
        assert!((s - 0.5).abs() < 1e-12 && (a - 2.0).abs() < 1e-12 && (r - 0.5).abs() < 1e-12);
        // multiplying back reproduces g
        let back = Mat2::opposite_horocycle(s)
            .mul(&Mat2::new(a, 0.0, 0.0, 1.0 / a))
            .mul(&Mat2::horocycle(r));
        assert!(crate::geom::right_invariant_dist(&back, &g) < 1e-12);
        let rot = Mat2::new(0.0, -1.0, 1.0, 0.0);
        assert!(matches!(qgu_factor(&rot), Err(Error::ZeroCorner)));
    }

    #[test]
    fn qbox_membership_consistent_with_coordinates() {
        let q = QBox::new(0.01, 10.0);
        let inside = QBox::element(0.0009, 0.009, -0.009);
        assert!(q.contains(&inside));
        let outside = QBox::element(0.002, 0.0, 0.0); // s exceeds delta/tau
        assert!(!q.contains(&outside));
    }
}
