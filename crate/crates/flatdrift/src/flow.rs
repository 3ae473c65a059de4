//! Teichmuller geodesic and horocycle flows with Delaunay renormalization,
//! the integer cocycle of basis changes, Lyapunov estimation and
//! nondivergence statistics.

use crate::config::ConstantsRegistry;
use crate::delaunay::{delaunay_with, DelaunayOutcome};
use crate::error::Result;
use crate::geom::{Mat2, C};
use crate::homology::HomologyFrame;
use crate::parallel::{par_map_collect, stream_seed};
use crate::saddle::systole;
use crate::surface::{PeriodVector, TranslationSurface};
use num_bigint::BigInt;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type IntMatrix = Vec<Vec<BigInt>>;

pub fn int_identity(n: usize) -> IntMatrix {
    (0..n)
        .map(|i| (0..n).map(|j| BigInt::from((i == j) as i64)).collect())
        .collect()
}

pub fn int_mul(a: &IntMatrix, b: &IntMatrix) -> IntMatrix {
    let n = a.len();
    let m = b[0].len();
    let k = b.len();
    let mut out = vec![vec![BigInt::from(0); m]; n];
    for i in 0..n {
        for l in 0..k {
            if a[i][l] == BigInt::from(0) {
                continue;
            }
            for j in 0..m {
                let prod = &a[i][l] * &b[l][j];
                out[i][j] += prod;
            }
        }
    }
    out
}

/// Fraction-free determinant (Bareiss).
pub fn int_det(a: &IntMatrix) -> BigInt {
    let n = a.len();
    let mut m: Vec<Vec<BigInt>> = a.clone();
    let mut denom = BigInt::from(1);
    let mut sign = BigInt::from(1);
    for k in 0..n {
        if m[k][k] == BigInt::from(0) {
            let Some(p) = (k + 1..n).find(|&r| m[r][k] != BigInt::from(0)) else {
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

fn big_from_i64(m: &[Vec<i64>]) -> IntMatrix {
    m.iter().map(|r| r.iter().map(|&v| BigInt::from(v)).collect()).collect()
}

/// A surface moving under the flows, with the accumulated integer cocycle of
/// homology basis changes and a symplectic frame of the start surface.
#[derive(Debug, Clone)]
pub struct FlowState {
    pub surface: TranslationSurface,
    pub frame: HomologyFrame,
    /// rows express the current homology basis over the starting one
    pub cocycle: IntMatrix,
    pub clock: f64,
}

impl FlowState {
    pub fn new(surface: TranslationSurface) -> Result<FlowState> {
        let (surface, _) = crate::delaunay::delaunay(&surface, 1_000_000)?;
        let frame = HomologyFrame::new(&surface)?;
        let n = surface.homology_dim();
        Ok(FlowState { surface, frame, cocycle: int_identity(n), clock: 0.0 })
    }

    fn absorb(&mut self, out: DelaunayOutcome) {
        self.cocycle = int_mul(&big_from_i64(&out.basis_change), &self.cocycle);
        self.surface = out.surface;
    }

    /// Apply one group element and re-Delaunay.
    pub fn apply(&mut self, g: &Mat2, flip_cap: usize) -> Result<()> {
        let moved = self.surface.apply_gl2(g)?;
        let out = delaunay_with(&moved, &[], flip_cap)?;
        self.absorb(out);
        Ok(())
    }

    /// Geodesic flow by time t in steps of at most `step`.
    pub fn flow(&mut self, t: f64, step: f64, registry: &ConstantsRegistry) -> Result<()> {
        assert!(step > 0.0 && step <= 0.5, "step must lie in (0, 0.5]");
        let scale = registry.time_scale;
        let mut remaining = t * scale;
        let dir = remaining.signum();
        while remaining.abs() > 1e-15 {
            let dt = dir * step.min(remaining.abs());
            self.apply(&Mat2::geodesic(dt), registry.flip_cap)?;
            remaining -= dt;
        }
        self.clock += t;
        Ok(())
    }

    pub fn horocycle(&mut self, r: f64, registry: &ConstantsRegistry) -> Result<()> {
        self.apply(&Mat2::horocycle(r), registry.flip_cap)
    }

    pub fn opposite_horocycle(&mut self, s: f64, registry: &ConstantsRegistry) -> Result<()> {
        self.apply(&Mat2::opposite_horocycle(s), registry.flip_cap)
    }

    /// |det| of the accumulated cocycle (1 when every basis change was
    /// unimodular).
    pub fn cocycle_det_abs(&self) -> BigInt {
        let d = int_det(&self.cocycle);
        if d < BigInt::from(0) {
            -d
        } else {
            d
        }
    }
}

/// Benettin-style Lyapunov estimation: a frame of real cohomology vectors is
/// transported through the renormalizing flips (the Gauss-Manin connection is
/// flat, so the flow itself leaves tracked classes untouched) and
/// re-orthonormalized every `renorm` time units. Growth rates are reported in
/// flow-time units, sorted descending and normalized so the top exponent is 1.
pub struct LyapunovEstimate {
    pub exponents: Vec<f64>,
    pub raw_rates: Vec<f64>,
    pub total_flips: usize,
}

pub fn lyapunov_estimate(
    seed_surface: &TranslationSurface,
    total_time: f64,
    renorm: f64,
    n_vectors: usize,
    seed: u64,
    registry: &ConstantsRegistry,
) -> Result<LyapunovEstimate> {
    assert!(total_time >= 1.0 && renorm > 0.05 && renorm <= 1.0);
    let (mut surface, _) = crate::delaunay::delaunay(seed_surface, registry.flip_cap)?;
    let n = surface.homology_dim();
    let k = n_vectors.min(n).max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut frame: Vec<Vec<f64>> =
        (0..k).map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
    orthonormalize(&mut frame);

    let scale = registry.time_scale;
    let steps = (total_time / renorm).ceil() as usize;
    let mut sums = vec![0.0; k];
    let mut total_flips = 0;
    for _ in 0..steps {
        let moved = surface.apply_gl2(&Mat2::geodesic(renorm * scale))?;
        let tracked: Vec<PeriodVector> = frame
            .iter()
            .map(|v| PeriodVector { coords: v.iter().map(|&x| C::new(x, 0.0)).collect() })
            .collect();
        let out = delaunay_with(&moved, &tracked, registry.flip_cap)?;
        total_flips += out.flips;
        surface = out.surface;
        frame = out.tracked.iter().map(|pv| pv.real_part()).collect();
        for (i, g) in gram_schmidt_norms(&mut frame).into_iter().enumerate() {
            sums[i] += g.max(1e-300).ln();
        }
    }
    let time = steps as f64 * renorm;
    let mut raw: Vec<f64> = sums.iter().map(|s| s / time).collect();
    raw.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let top = raw[0];
    let exponents = raw.iter().map(|r| r / top).collect();
    Ok(LyapunovEstimate { exponents, raw_rates: raw, total_flips })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// In-place Gram-Schmidt; returns the residual norms (the QR diagonal).
fn gram_schmidt_norms(frame: &mut [Vec<f64>]) -> Vec<f64> {
    let mut norms = Vec::with_capacity(frame.len());
    for i in 0..frame.len() {
        for j in 0..i {
            let c = {
                let (head, tail) = frame.split_at(i);
                dot(&tail[0], &head[j])
            };
            let prev = frame[j].clone();
            for (x, p) in frame[i].iter_mut().zip(&prev) {
                *x -= c * p;
            }
        }
        let norm = dot(&frame[i], &frame[i]).sqrt();
        norms.push(norm);
        if norm > 0.0 {
            for x in frame[i].iter_mut() {
                *x /= norm;
            }
        }
    }
    norms
}

fn orthonormalize(frame: &mut [Vec<f64>]) {
    let _ = gram_schmidt_norms(frame);
}

/// Systoles of a_t u_r x over uniform random r in [0,1]. Deterministic given
/// (seed, sample count) and independent of the worker count.
pub fn nondivergence_systoles(
    surface: &TranslationSurface,
    t: f64,
    n_samples: usize,
    seed: u64,
    registry: &ConstantsRegistry,
) -> Vec<f64> {
    let results = par_map_collect(n_samples, |i| {
        let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(seed, i as u64));
        let r: f64 = rng.gen_range(0.0..1.0);
        let mut state = match FlowState::new(surface.apply_gl2(&Mat2::horocycle(r)).unwrap()) {
            Ok(st) => st,
            Err(_) => return f64::NAN,
        };
        match state.flow(t, 0.5, registry) {
            Ok(()) => systole(&state.surface),
            Err(_) => f64::NAN,
        }
    });
    results
}

/// Monte-Carlo estimate of |{r in [0,1]: systole(a_t u_r x) < eps}|.
pub fn nondivergence_fraction(
    surface: &TranslationSurface,
    t: f64,
    eps: f64,
    n_samples: usize,
    seed: u64,
    registry: &ConstantsRegistry,
) -> f64 {
    let sys = nondivergence_systoles(surface, t, n_samples, seed, registry);
    fraction_below(&sys, eps)
}

pub fn fraction_below(systoles: &[f64], eps: f64) -> f64 {
    let n = systoles.len() as f64;
    systoles.iter().filter(|s| s.is_finite() && **s < eps).count() as f64 / n
}

/// Symbolic coefficients of h_r^{-1} S h_r with h_r = a_{5 varpi t} u_r, as
/// polynomials in the shift R. Evaluating at R = r reproduces the matrix
/// conjugation.
#[derive(Debug, Clone, Copy)]
pub struct ConjugationPolynomials {
    /// p11(R) = c1 R + c0
    pub p11: [f64; 2],
    /// p12(R) = c2 R^2 + c1 R + c0
    pub p12: [f64; 3],
    /// constant in R
    pub p21: f64,
    /// p22(R) = c1 R + c0
    pub p22: [f64; 2],
}

pub fn conjugation_polynomials(s: &Mat2, varpi: f64, t: f64) -> ConjugationPolynomials {
    let lam = (5.0 * varpi * t).exp();
    // a^{-1} S a scales the corners: X12 = S12/lam, X21 = lam*S21
    let x12 = s.b / lam;
    let x21 = lam * s.c;
    ConjugationPolynomials {
        p11: [-x21, s.a],
        p12: [-x21, s.a - s.d, x12],
        p21: x21,
        p22: [x21, s.d],
    }
}

impl ConjugationPolynomials {
    pub fn eval(&self, r: f64) -> Mat2 {
        Mat2::new(
            self.p11[0] * r + self.p11[1],
            self.p12[0] * r * r + self.p12[1] * r + self.p12[2],
            self.p21,
            self.p22[0] * r + self.p22[1],
        )
    }
}

pub fn conjugate_by_h(s: &Mat2, varpi: f64, t: f64, r: f64) -> Mat2 {
    let h = Mat2::geodesic(5.0 * varpi * t).mul(&Mat2::horocycle(r));
    h.inverse().mul(s).mul(&h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prototypes::{perturbed_prototype_surface, prototype_surface, Prototype};
    use crate::surface::square_torus;
    #[allow(unused_imports)]
    use crate::geom::C;

    fn reg() -> ConstantsRegistry {
        ConstantsRegistry::default()
    }

    fn d8() -> TranslationSurface {
        let p = Prototype { a: 0, b: 2, c: 1, e: 0 };
        prototype_surface(&p).unwrap().1.surface
    }

    #[test]
    fn zero_time_flow_is_identity() {
        let mut st = FlowState::new(d8()).unwrap();
        let before = crate::delaunay::canonical_form(&st.surface);
        st.flow(0.0, 0.5, &reg()).unwrap();
        assert_eq!(crate::delaunay::canonical_form(&st.surface), before);
        assert_eq!(st.cocycle_det_abs(), BigInt::from(1));
    }

    #[test]
    fn flow_roundtrip_restores_surface() {
        let mut st = FlowState::new(d8()).unwrap();
        let before = st.surface.clone();
        st.flow(2.0, 0.5, &reg()).unwrap();
        st.flow(-2.0, 0.5, &reg()).unwrap();
        assert!(crate::delaunay::translation_equivalent(&before, &st.surface, 1e-6));
        // total basis change cancels
        let n = before.homology_dim();
        assert_eq!(st.cocycle, int_identity(n));
    }

    #[test]
    fn cocycle_is_unimodular_along_flow() {
        let mut st = FlowState::new(d8()).unwrap();
        st.flow(4.0, 0.5, &reg()).unwrap();
        assert_eq!(st.cocycle_det_abs(), BigInt::from(1));
        assert!(st.clock == 4.0);
    }

    #[test]
    fn systole_lower_bound_under_flow() {
        let mut st = FlowState::new(d8()).unwrap();
        let s0 = systole(&st.surface);
        st.flow(5.0, 0.5, &reg()).unwrap();
        assert!(systole(&st.surface) >= (-5.0f64).exp() * s0 - 1e-9);
    }

    #[test]
    fn horocycle_composition_on_canonical_forms() {
        let mut a = FlowState::new(d8()).unwrap();
        a.horocycle(0.3, &reg()).unwrap();
        a.horocycle(0.45, &reg()).unwrap();
        let mut b = FlowState::new(d8()).unwrap();
        b.horocycle(0.75, &reg()).unwrap();
        assert!(crate::delaunay::translation_equivalent(&a.surface, &b.surface, 1e-6));
    }

    #[test]
    fn torus_exponents_are_plus_minus_one() {
        // golden vertical direction: bounded-type, so the orbit is recurrent
        let phi = 0.5 * (1.0 + 5f64.sqrt());
        let s = crate::surface::torus(C::new(1.0, 0.0), C::new(phi, 1.0)).unwrap();
        let est = lyapunov_estimate(&s, 300.0, 0.5, 2, 7, &reg()).unwrap();
        assert_eq!(est.exponents.len(), 2);
        assert!((est.exponents[0] - 1.0).abs() < 1e-12);
        assert!((est.exponents[1] + 1.0).abs() < 0.05, "got {:?}", est.exponents);
        // raw top rate is 1/2 in the a_{t/2} normalization
        assert!((est.raw_rates[0] - 0.5).abs() < 0.05, "raw {:?}", est.raw_rates);
    }

    #[test]
    fn h2_second_exponent_near_one_third() {
        let s = perturbed_prototype_surface(&Prototype { a: 0, b: 2, c: 1, e: 0 }, 3, 0.2).unwrap();
        let est = lyapunov_estimate(&s, 800.0, 0.5, 4, 11, &reg()).unwrap();
        assert!(
            (est.exponents[1] - 1.0 / 3.0).abs() < 0.08,
            "second exponent {:?}",
            est.exponents
        );
    }

    #[test]
    fn nondivergence_fraction_monotone_and_deterministic() {
        let s = d8().normalize_area();
        let sys = nondivergence_systoles(&s, 3.0, 400, 5, &reg());
        let f1 = fraction_below(&sys, 0.05);
        let f2 = fraction_below(&sys, 0.1);
        let f3 = fraction_below(&sys, 0.3);
        assert!(f1 <= f2 && f2 <= f3);
        let sys2 = nondivergence_systoles(&s, 3.0, 400, 5, &reg());
        assert_eq!(sys, sys2);
        // far below the reachable minimum feature the fraction vanishes
        let tiny = fraction_below(&sys, 1e-6);
        assert_eq!(tiny, 0.0);
    }

    #[test]
    fn conjugation_polynomials_match_direct_conjugation() {
        let cases = [
            (Mat2::IDENTITY, 1.0, 0.3),
            (Mat2::new(1.0, 1.0, 0.0, 1.0), 1.0, 0.0),
            (Mat2::new(0.9, 0.4, -0.3, 0.98), 0.7, 0.4),
            (Mat2::new(2.0, 1.0, 1.0, 1.0), 0.2, 1.1),
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for (s, varpi, t) in cases {
            for _ in 0..10 {
                let r: f64 = rng.gen_range(-1.0..1.0);
                let poly = conjugation_polynomials(&s, varpi, t);
                let direct = conjugate_by_h(&s, varpi, t, r);
                assert!(
                    crate::geom::right_invariant_dist(&poly.eval(r), &direct) < 1e-9
                        || (poly.eval(r).a - direct.a).abs()
                            + (poly.eval(r).b - direct.b).abs()
                            + (poly.eval(r).c - direct.c).abs()
                            + (poly.eval(r).d - direct.d).abs()
                            < 1e-7,
                    "mismatch at r={r}"
                );
            }
        }
    }

    #[test]
    fn identity_conjugation_is_identity_polys() {
        let p = conjugation_polynomials(&Mat2::IDENTITY, 1.3, 2.0);
        assert_eq!(p.p11, [0.0, 1.0]);
        assert_eq!(p.p12, [0.0, 0.0, 0.0]);
        assert_eq!(p.p21, 0.0);
        assert_eq!(p.p22, [0.0, 1.0]);
    }

    #[test]
    fn unipotent_conjugation_constant_p12_at_zero_time() {
        let s = Mat2::new(1.0, 1.0, 0.0, 1.0);
        let p = conjugation_polynomials(&s, 1.0, 0.0);
        assert_eq!(p.p12, [0.0, 0.0, 1.0]);
    }
}
