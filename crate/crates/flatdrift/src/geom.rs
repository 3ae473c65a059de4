//! Small 2d helpers: complex edge vectors and 2x2 real matrices.

use num_complex::Complex64;

pub type C = Complex64;

pub fn cross(a: C, b: C) -> f64 {
    a.re * b.im - a.im * b.re
}

pub fn dot(a: C, b: C) -> f64 {
    a.re * b.re + a.im * b.im
}

/// 2x2 real matrix acting on edge vectors (column convention).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mat2 {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl Mat2 {
    pub const IDENTITY: Mat2 = Mat2 { a: 1.0, b: 0.0, c: 0.0, d: 1.0 };

    pub fn new(a: f64, b: f64, c: f64, d: f64) -> Self {
        Mat2 { a, b, c, d }
    }

    /// diag(e^{t/2}, e^{-t/2}), the geodesic flow normalization of the
    /// introduction. `time_scale` 2.0 reproduces the e^t convention used in
    /// some displayed computations.
    pub fn geodesic(t: f64) -> Self {
        Mat2::new((0.5 * t).exp(), 0.0, 0.0, (-0.5 * t).exp())
    }

    /// Upper unipotent u_r.
    pub fn horocycle(r: f64) -> Self {
        Mat2::new(1.0, r, 0.0, 1.0)
    }

    /// Lower unipotent ū_s.
    pub fn opposite_horocycle(s: f64) -> Self {
        Mat2::new(1.0, 0.0, s, 1.0)
    }

    pub fn rotation(theta: f64) -> Self {
        let (s, c) = theta.sin_cos();
        Mat2::new(c, -s, s, c)
    }

    pub fn det(&self) -> f64 {
        self.a * self.d - self.b * self.c
    }

    pub fn trace(&self) -> f64 {
        self.a + self.d
    }

    pub fn inverse(&self) -> Mat2 {
        let det = self.det();
        Mat2::new(self.d / det, -self.b / det, -self.c / det, self.a / det)
    }

    pub fn transpose(&self) -> Mat2 {
        Mat2::new(self.a, self.c, self.b, self.d)
    }

    pub fn mul(&self, o: &Mat2) -> Mat2 {
        Mat2::new(
            self.a * o.a + self.b * o.c,
            self.a * o.b + self.b * o.d,
            self.c * o.a + self.d * o.c,
            self.c * o.b + self.d * o.d,
        )
    }

    pub fn apply(&self, v: C) -> C {
        C::new(self.a * v.re + self.b * v.im, self.c * v.re + self.d * v.im)
    }

    /// Max-entry norm of the matrix itself.
    pub fn norm_entries(&self) -> f64 {
        self.a.abs().max(self.b.abs()).max(self.c.abs()).max(self.d.abs())
    }

    /// Max-entry norm of g - id, the right-invariant metric surrogate
    /// d(g1,g2) = ||g1 g2^{-1} - id|| used throughout.
    pub fn dist_to_identity(&self) -> f64 {
        (self.a - 1.0)
            .abs()
            .max(self.b.abs())
            .max(self.c.abs())
            .max((self.d - 1.0).abs())
    }

    /// Larger singular value (operator norm).
    pub fn singular_max(&self) -> f64 {
        let (s1, _) = self.singular_values();
        s1
    }

    /// Both singular values, descending.
    pub fn singular_values(&self) -> (f64, f64) {
        // eigenvalues of g^T g
        let p = self.a * self.a + self.c * self.c;
        let q = self.a * self.b + self.c * self.d;
        let r = self.b * self.b + self.d * self.d;
        let tr = p + r;
        let disc = ((p - r) * (p - r) + 4.0 * q * q).sqrt();
        let l1 = 0.5 * (tr + disc);
        let l2 = 0.5 * (tr - disc);
        (l1.max(0.0).sqrt(), l2.max(0.0).sqrt())
    }

    /// Cartan a-parameter: g = k1 a_s k2 with s >= 0, so that the larger
    /// singular value is e^{s/2}.
    pub fn cartan_time(&self) -> f64 {
        2.0 * self.singular_max().max(1e-300).ln()
    }
}

pub fn right_invariant_dist(g1: &Mat2, g2: &Mat2) -> f64 {
    g1.mul(&g2.inverse()).dist_to_identity()
}

/// Least-squares linear fit of y against x; returns (slope, intercept, r2).
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for (&x, &y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
        syy += (y - my) * (y - my);
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    (slope, intercept, r2)
}
