//! Exact arithmetic in the quadratic module Q + Q*lambda with
//! lambda^2 = e*lambda + bc, where lambda = (e + sqrt(D))/2 and D = e^2 + 4bc.
//!
//! Working with the minimal polynomial of lambda avoids normalizing sqrt(D)
//! representations. When D happens to be a perfect square the module is not a
//! field; elements are then folded onto Q immediately (lambda is rational),
//! which keeps division total.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

/// Defining data of the quadratic module.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QuadModulus {
    pub e: i64,
    pub bc: i64,
}

impl QuadModulus {
    pub fn new(e: i64, bc: i64) -> QuadModulus {
        QuadModulus { e, bc }
    }

    pub fn discriminant(&self) -> i64 {
        self.e * self.e + 4 * self.bc
    }

    fn sqrt_disc_exact(&self) -> Option<i64> {
        let d = self.discriminant();
        if d < 0 {
            return None;
        }
        let r = (d as f64).sqrt().round() as i64;
        for c in [r - 1, r, r + 1] {
            if c >= 0 && c * c == d {
                return Some(c);
            }
        }
        None
    }

    /// lambda as a rational when D is a perfect square.
    fn rational_lambda(&self) -> Option<BigRational> {
        self.sqrt_disc_exact().map(|s| {
            BigRational::new(BigInt::from(self.e + s), BigInt::from(2))
        })
    }

    pub fn lambda_f64(&self) -> f64 {
        0.5 * (self.e as f64 + (self.discriminant() as f64).sqrt())
    }
}

/// p + q*lambda with exact rational p, q.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadElem {
    pub p: BigRational,
    pub q: BigRational,
    pub modulus: QuadModulus,
}

impl QuadElem {
    pub fn new(p: BigRational, q: BigRational, modulus: QuadModulus) -> QuadElem {
        let mut el = QuadElem { p, q, modulus };
        el.fold_square();
        el
    }

    fn fold_square(&mut self) {
        if Zero::is_zero(&self.q) {
            return;
        }
        if let Some(l) = self.modulus.rational_lambda() {
            self.p += &self.q * l;
            self.q = BigRational::zero();
        }
    }

    pub fn from_int(n: i64, modulus: QuadModulus) -> QuadElem {
        QuadElem::new(BigRational::from(BigInt::from(n)), BigRational::zero(), modulus)
    }

    pub fn from_rational(p: BigRational, modulus: QuadModulus) -> QuadElem {
        QuadElem::new(p, BigRational::zero(), modulus)
    }

    pub fn lambda(modulus: QuadModulus) -> QuadElem {
        QuadElem::new(BigRational::zero(), BigRational::one(), modulus)
    }

    pub fn is_zero(&self) -> bool {
        Zero::is_zero(&self.p) && Zero::is_zero(&self.q)
    }

    /// Exact integrality: rational with denominator 1.
    pub fn is_integer(&self) -> bool {
        Zero::is_zero(&self.q) && self.p.is_integer()
    }

    pub fn to_f64(&self) -> f64 {
        rational_to_f64(&self.p) + rational_to_f64(&self.q) * self.modulus.lambda_f64()
    }

    fn assert_same_modulus(&self, o: &QuadElem) {
        assert_eq!(self.modulus, o.modulus, "mixed quadratic moduli");
    }

    pub fn add(&self, o: &QuadElem) -> QuadElem {
        self.assert_same_modulus(o);
        QuadElem::new(&self.p + &o.p, &self.q + &o.q, self.modulus)
    }

    pub fn sub(&self, o: &QuadElem) -> QuadElem {
        self.assert_same_modulus(o);
        QuadElem::new(&self.p - &o.p, &self.q - &o.q, self.modulus)
    }

    pub fn neg(&self) -> QuadElem {
        QuadElem { p: -self.p.clone(), q: -self.q.clone(), modulus: self.modulus }
    }

    /// (p1 + q1 L)(p2 + q2 L) with L^2 = e L + bc.
    pub fn mul(&self, o: &QuadElem) -> QuadElem {
        self.assert_same_modulus(o);
        let e = BigRational::from(BigInt::from(self.modulus.e));
        let bc = BigRational::from(BigInt::from(self.modulus.bc));
        let qq = &self.q * &o.q;
        let p = &self.p * &o.p + &qq * bc;
        let q = &self.p * &o.q + &self.q * &o.p + &qq * e;
        QuadElem::new(p, q, self.modulus)
    }

    /// Exact inverse via the conjugate lambda' = e - lambda.
    pub fn inv(&self) -> QuadElem {
        if Zero::is_zero(&self.q) {
            assert!(!Zero::is_zero(&self.p), "division by zero");
            return QuadElem::new(self.p.recip(), BigRational::zero(), self.modulus);
        }
        let e = BigRational::from(BigInt::from(self.modulus.e));
        let bc = BigRational::from(BigInt::from(self.modulus.bc));
        // (p + q L)(p + q e - q L) = p^2 + p q e - q^2 bc
        let norm = &self.p * &self.p + &self.p * &self.q * &e - &self.q * &self.q * &bc;
        assert!(!Zero::is_zero(&norm), "division by zero divisor");
        QuadElem::new((&self.p + &self.q * e) / &norm, -(&self.q / &norm), self.modulus)
    }

    pub fn div(&self, o: &QuadElem) -> QuadElem {
        self.mul(&o.inv())
    }

    /// Exact sign using lambda = (e + sqrt(D))/2 > (e + |e|)/2.
    pub fn sign(&self) -> i32 {
        if Zero::is_zero(&self.q) {
            return sign_of(&self.p);
        }
        // p + q*lambda >= 0  <=>  lambda >= -p/q (q > 0), reversed for q < 0
        let r = -(&self.p / &self.q);
        let cmp = lambda_cmp_rational(self.modulus, &r);
        if self.q.is_positive() {
            cmp
        } else {
            -cmp
        }
    }
}

fn sign_of(x: &BigRational) -> i32 {
    if Zero::is_zero(x) {
        0
    } else if x.is_positive() {
        1
    } else {
        -1
    }
}

/// sign of lambda - r for rational r.
fn lambda_cmp_rational(m: QuadModulus, r: &BigRational) -> i32 {
    // lambda - r = (e - 2r + sqrt(D)) / 2
    let t = BigRational::from(BigInt::from(2)) * r - BigRational::from(BigInt::from(m.e));
    // sign of sqrt(D) - t
    if !t.is_positive() {
        // sqrt(D) > 0 >= t unless both zero
        let d = m.discriminant();
        if d == 0 && Zero::is_zero(&t) {
            return 0;
        }
        return 1;
    }
    let d = BigRational::from(BigInt::from(m.discriminant()));
    sign_of(&(d - &t * &t))
}

pub fn rational_to_f64(x: &BigRational) -> f64 {
    let num = x.numer();
    let den = x.denom();
    // exact enough for display and tolerances at our scales
    let nf = num.to_string().parse::<f64>().unwrap_or(f64::NAN);
    let df = den.to_string().parse::<f64>().unwrap_or(f64::NAN);
    nf / df
}

// ---------------------------------------------------------------------------
// scalar abstraction shared by the float and exact lattice constructions

/// Ring-with-sign operations the slit construction needs. `f64` gives the
/// numeric path, `QuadElem` the exact one.
pub trait Scalar: Clone + std::fmt::Debug {
    fn add(&self, o: &Self) -> Self;
    fn sub(&self, o: &Self) -> Self;
    fn mul(&self, o: &Self) -> Self;
    fn div(&self, o: &Self) -> Self;
    fn neg(&self) -> Self;
    /// An integer constant in the same coefficient ring as `self`.
    fn like_int(&self, n: i64) -> Self;
    fn sign(&self) -> i32;
    fn is_integer(&self) -> bool;
    fn to_f64(&self) -> f64;
    fn is_zero(&self) -> bool {
        self.sign() == 0
    }
}

impl Scalar for f64 {
    fn add(&self, o: &Self) -> Self {
        self + o
    }
    fn sub(&self, o: &Self) -> Self {
        self - o
    }
    fn mul(&self, o: &Self) -> Self {
        self * o
    }
    fn div(&self, o: &Self) -> Self {
        self / o
    }
    fn neg(&self) -> Self {
        -self
    }
    fn like_int(&self, n: i64) -> Self {
        n as f64
    }
    fn sign(&self) -> i32 {
        if self.abs() <= 1e-12 {
            0
        } else if *self > 0.0 {
            1
        } else {
            -1
        }
    }
    fn is_integer(&self) -> bool {
        (self - self.round()).abs() <= 1e-9 * self.abs().max(1.0)
    }
    fn to_f64(&self) -> f64 {
        *self
    }
}

impl Scalar for QuadElem {
    fn add(&self, o: &Self) -> Self {
        QuadElem::add(self, o)
    }
    fn sub(&self, o: &Self) -> Self {
        QuadElem::sub(self, o)
    }
    fn mul(&self, o: &Self) -> Self {
        QuadElem::mul(self, o)
    }
    fn div(&self, o: &Self) -> Self {
        QuadElem::div(self, o)
    }
    fn neg(&self) -> Self {
        QuadElem::neg(self)
    }
    fn like_int(&self, n: i64) -> Self {
        QuadElem::from_int(n, self.modulus)
    }
    fn sign(&self) -> i32 {
        QuadElem::sign(self)
    }
    fn is_integer(&self) -> bool {
        QuadElem::is_integer(self)
    }
    fn to_f64(&self) -> f64 {
        QuadElem::to_f64(self)
    }
}

impl Scalar for BigRational {
    fn add(&self, o: &Self) -> Self {
        self + o
    }
    fn sub(&self, o: &Self) -> Self {
        self - o
    }
    fn mul(&self, o: &Self) -> Self {
        self * o
    }
    fn div(&self, o: &Self) -> Self {
        self / o
    }
    fn neg(&self) -> Self {
        -self
    }
    fn like_int(&self, n: i64) -> Self {
        BigRational::from(BigInt::from(n))
    }
    fn sign(&self) -> i32 {
        sign_of(self)
    }
    fn is_integer(&self) -> bool {
        BigRational::is_integer(self)
    }
    fn to_f64(&self) -> f64 {
        rational_to_f64(self)
    }
}

/// Nullspace {v : M v = 0} of a matrix over an exact field, by Gaussian
/// elimination with exact pivot tests. `template` supplies the coefficient
/// ring for constants.
pub fn nullspace<T: Scalar>(rows: &[Vec<T>], ncols: usize, template: &T) -> Vec<Vec<T>> {
    let zero = template.like_int(0);
    let one = template.like_int(1);
    let mut m: Vec<Vec<T>> = rows.to_vec();
    let mut pivots: Vec<usize> = Vec::new();
    let mut rank = 0;
    for col in 0..ncols {
        let Some(pr) = (rank..m.len()).find(|&r| !m[r][col].is_zero()) else {
            continue;
        };
        m.swap(rank, pr);
        let inv = one.div(&m[rank][col]);
        for c in 0..ncols {
            m[rank][c] = m[rank][c].mul(&inv);
        }
        for r in 0..m.len() {
            if r != rank && !m[r][col].is_zero() {
                let f = m[r][col].clone();
                for c in 0..ncols {
                    let sub = f.mul(&m[rank][c]);
                    m[r][c] = m[r][c].sub(&sub);
                }
            }
        }
        pivots.push(col);
        rank += 1;
        if rank == m.len() {
            break;
        }
    }
    let mut basis = Vec::new();
    for free in 0..ncols {
        if pivots.contains(&free) {
            continue;
        }
        let mut v = vec![zero.clone(); ncols];
        v[free] = one.clone();
        for (r, &pc) in pivots.iter().enumerate() {
            v[pc] = m[r][free].neg();
        }
        basis.push(v);
    }
    basis
}

/// 2-vector helpers over a scalar.
pub fn v_add<T: Scalar>(a: &[T; 2], b: &[T; 2]) -> [T; 2] {
    [a[0].add(&b[0]), a[1].add(&b[1])]
}

pub fn v_sub<T: Scalar>(a: &[T; 2], b: &[T; 2]) -> [T; 2] {
    [a[0].sub(&b[0]), a[1].sub(&b[1])]
}

pub fn v_neg<T: Scalar>(a: &[T; 2]) -> [T; 2] {
    [a[0].neg(), a[1].neg()]
}

pub fn v_scale_int<T: Scalar>(a: &[T; 2], n: i64) -> [T; 2] {
    let c = a[0].like_int(n);
    [a[0].mul(&c), a[1].mul(&c)]
}

pub fn v_cross<T: Scalar>(a: &[T; 2], b: &[T; 2]) -> T {
    a[0].mul(&b[1]).sub(&a[1].mul(&b[0]))
}

pub fn v_to_c<T: Scalar>(a: &[T; 2]) -> crate::geom::C {
    crate::geom::C::new(a[0].to_f64(), a[1].to_f64())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rat(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    #[test]
    fn lambda_squared_reduces() {
        // D = 8 prototype (0,2,1,0): lambda^2 = 0*lambda + 2
        let m = QuadModulus::new(0, 2);
        let l = QuadElem::lambda(m);
        let sq = l.mul(&l);
        assert_eq!(sq, QuadElem::from_int(2, m));
        assert!((l.to_f64() - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn lambda_squared_general() {
        // lambda^2 = e lambda + bc for (e, bc) = (-1, 1), D = 5
        let m = QuadModulus::new(-1, 1);
        let l = QuadElem::lambda(m);
        let sq = l.mul(&l);
        let want = QuadElem::new(rat(1, 1), rat(-1, 1), m);
        assert_eq!(sq, want);
        // lambda = (-1 + sqrt 5)/2 ~ 0.618
        assert!((l.to_f64() - 0.618033988749895).abs() < 1e-12);
    }

    #[test]
    fn exact_sign_and_comparison() {
        let m = QuadModulus::new(0, 2); // lambda = sqrt 2
        let l = QuadElem::lambda(m);
        // lambda < 3/2: sign(lambda - 3/2) = -1
        let d = l.sub(&QuadElem::from_rational(rat(3, 2), m));
        assert_eq!(d.sign(), -1);
        // lambda > 7/5
        let d = l.sub(&QuadElem::from_rational(rat(7, 5), m));
        assert_eq!(d.sign(), 1);
    }

    #[test]
    fn division_roundtrip() {
        let m = QuadModulus::new(-1, 1);
        let a = QuadElem::new(rat(3, 2), rat(-2, 7), m);
        let b = QuadElem::new(rat(1, 3), rat(5, 2), m);
        let q = a.div(&b);
        assert_eq!(q.mul(&b), a);
    }

    #[test]
    fn square_discriminant_folds_to_rationals() {
        // (e, bc) = (1, 2): D = 9, lambda = 2
        let m = QuadModulus::new(1, 2);
        let l = QuadElem::lambda(m);
        assert!(num_traits::Zero::is_zero(&l.q));
        assert_eq!(l.p, rat(2, 1));
        let x = QuadElem::new(rat(1, 2), rat(3, 1), m); // 1/2 + 3*2 = 13/2
        assert_eq!(x.p, rat(13, 2));
        assert_eq!(x.div(&l).mul(&l), x);
    }
}
