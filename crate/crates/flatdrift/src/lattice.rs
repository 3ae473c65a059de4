//! Lattices, slit triples and the genus-2 connected sum.
//!
//! The sum of two slit tori is built from a fixed 6-triangle template: the
//! first torus becomes a hexagon fanned into four triangles around the slit
//! endpoint, the second a parallelogram split along a diagonal, and the two
//! slit banks are cross-glued. The template only needs an adapted basis of
//! the first lattice (the slit must have both coefficients in (0,1)), which
//! exists exactly when the slit misses the lattice.
//!
//! Everything is generic over [`Scalar`], so prototypes run in exact
//! quadratic arithmetic while g-translates run in floats.

use crate::error::{Error, Result};
use crate::quad::{v_add, v_cross, v_neg, v_sub, v_to_c, Scalar};
use crate::surface::{build_surface, TranslationSurface, Triangle};

#[derive(Debug, Clone)]
pub struct Lattice2D<T> {
    pub v1: [T; 2],
    pub v2: [T; 2],
}

impl<T: Scalar> Lattice2D<T> {
    pub fn new(v1: [T; 2], v2: [T; 2]) -> Lattice2D<T> {
        Lattice2D { v1, v2 }
    }

    pub fn covolume(&self) -> T {
        v_cross(&self.v1, &self.v2)
    }

    /// Coefficients of w over (v1, v2).
    pub fn coords(&self, w: &[T; 2]) -> [T; 2] {
        let det = self.covolume();
        let alpha = v_cross(w, &self.v2).div(&det);
        let beta = v_cross(&self.v1, w).div(&det);
        [alpha, beta]
    }

    pub fn point(&self, m: i64, n: i64) -> [T; 2] {
        v_add(&crate::quad::v_scale_int(&self.v1, m), &crate::quad::v_scale_int(&self.v2, n))
    }
}

#[derive(Debug, Clone)]
pub struct SlitTriple<T> {
    pub lat1: Lattice2D<T>,
    pub lat2: Lattice2D<T>,
    pub slit: [T; 2],
}

/// Parameters t in (0,1] with t*slit in the lattice, by exact coefficient
/// arithmetic.
fn segment_hits<T: Scalar>(lat: &Lattice2D<T>, v: &[T; 2]) -> Result<Vec<T>> {
    let [alpha, beta] = lat.coords(v);
    if alpha.is_zero() && beta.is_zero() {
        return Err(Error::Invalid("slit vector is zero".into()));
    }
    let (lead, other, lead_f) = if !alpha.is_zero() {
        let f = alpha.to_f64();
        (alpha, beta, f)
    } else {
        let f = beta.to_f64();
        (beta, alpha, f)
    };
    let mut hits = Vec::new();
    let m_max = lead_f.abs().ceil() as i64 + 1;
    let step = if lead_f > 0.0 { 1 } else { -1 };
    for k in 1..=m_max {
        let m = k * step;
        // t = m / lead
        let t = lead.like_int(m).div(&lead);
        let one_minus = t.like_int(1).sub(&t);
        if t.sign() <= 0 {
            continue;
        }
        if one_minus.sign() < 0 {
            break;
        }
        if t.mul(&other).is_integer() {
            hits.push(t);
        }
    }
    Ok(hits)
}

impl<T: Scalar> SlitTriple<T> {
    /// Check the defining conditions: the open slit misses both lattices,
    /// its far endpoint lies in the second lattice only.
    pub fn validate(&self) -> Result<()> {
        if self.lat1.covolume().sign() <= 0 || self.lat2.covolume().sign() <= 0 {
            return Err(Error::Invalid("lattice basis is not positively oriented".into()));
        }
        for t in segment_hits(&self.lat1, &self.slit)? {
            let p = [self.slit[0].mul(&t), self.slit[1].mul(&t)];
            return Err(Error::SlitHitsLattice {
                lattice: 1,
                x: p[0].to_f64(),
                y: p[1].to_f64(),
            });
        }
        let hits2 = segment_hits(&self.lat2, &self.slit)?;
        let mut endpoint_found = false;
        for t in &hits2 {
            if t.sub(&t.like_int(1)).is_zero() {
                endpoint_found = true;
            } else {
                let p = [self.slit[0].mul(t), self.slit[1].mul(t)];
                return Err(Error::SlitHitsLattice {
                    lattice: 2,
                    x: p[0].to_f64(),
                    y: p[1].to_f64(),
                });
            }
        }
        if !endpoint_found {
            return Err(Error::Invalid(
                "slit endpoint is not a lattice point of the second torus".into(),
            ));
        }
        Ok(())
    }

    pub fn apply_gl2(&self, g: &crate::geom::Mat2) -> SlitTriple<f64> {
        let f = |v: &[T; 2]| {
            let c = g.apply(v_to_c(v));
            [c.re, c.im]
        };
        SlitTriple {
            lat1: Lattice2D::new(f(&self.lat1.v1), f(&self.lat1.v2)),
            lat2: Lattice2D::new(f(&self.lat2.v1), f(&self.lat2.v2)),
            slit: f(&self.slit),
        }
    }
}

fn extended_gcd(a: i64, b: i64) -> (i64, i64, i64) {
    if b == 0 {
        (a.abs(), a.signum(), 0)
    } else {
        let (g, x, y) = extended_gcd(b, a.rem_euclid(b));
        (g, y, x - (a.div_euclid(b)) * y)
    }
}

/// Basis (p1, p2) of the first lattice adapted to the slit: the slit's
/// coefficient cross with p2 lies strictly between 0 and 1.
fn adapted_basis<T: Scalar>(lat: &Lattice2D<T>, v: &[T; 2]) -> Result<([T; 2], [T; 2])> {
    let [alpha, beta] = lat.coords(v);
    let mut pairs: Vec<(i64, i64)> = Vec::new();
    let bound = 60i64;
    for c in -bound..=bound {
        for d in -bound..=bound {
            if (c, d) != (0, 0) && extended_gcd(c, d).0 == 1 {
                pairs.push((c, d));
            }
        }
    }
    pairs.sort_by_key(|&(c, d)| (c.abs() + d.abs(), c, d));
    for (c, d) in pairs {
        // f = alpha*d - beta*c must satisfy 0 < f < 1
        let f = alpha.mul(&alpha.like_int(d)).sub(&beta.mul(&beta.like_int(c)));
        if f.sign() > 0 && f.like_int(1).sub(&f).sign() > 0 {
            // complete (c,d) to a unimodular pair: a*d - b*c = 1
            let (_, s, t) = extended_gcd(d, -c);
            let (a, b) = (s, t);
            debug_assert_eq!(a * d - b * c, 1);
            let p1 = lat.point(a, b);
            let p2 = lat.point(c, d);
            return Ok((p1, p2));
        }
    }
    Err(Error::Invalid("no adapted lattice basis found for the slit".into()))
}

/// The connected sum together with the exact edge vectors of its triangles.
#[derive(Debug, Clone)]
pub struct ConnectedSum<T> {
    pub surface: TranslationSurface,
    pub exact_edges: Vec<[[T; 2]; 3]>,
}

/// Cross-glue the two slit tori into a genus-2 surface with one cone point of
/// angle 6*pi.
pub fn connected_sum<T: Scalar>(triple: &SlitTriple<T>) -> Result<ConnectedSum<T>> {
    triple.validate()?;
    let v = &triple.slit;
    let (p1, p2) = adapted_basis(&triple.lat1, v)?;

    // second torus: complete the (primitive) slit to a positively oriented
    // basis (v, w)
    let [cm, cn] = triple.lat2.coords(v);
    let m = cm.to_f64().round() as i64;
    let n = cn.to_f64().round() as i64;
    if !v_sub(v, &triple.lat2.point(m, n)).iter().all(|x| x.is_zero()) {
        return Err(Error::Invalid("slit endpoint has non-integer lattice coordinates".into()));
    }
    let (g, s, t) = extended_gcd(m, n);
    if g != 1 {
        return Err(Error::Invalid("slit endpoint is not primitive in the second lattice".into()));
    }
    // m*s + n*t = 1; take w = -t*w1 + s*w2 so that det(v, w) = det(w1, w2)
    let w = triple.lat2.point(-t, s);

    let a_pt = v.clone();
    let b_pt = p1.clone();
    let c_pt = v_add(&p1, &p2);
    let d_pt = v_add(v, &p2);
    let e_pt = p2.clone();
    let vw = v_add(v, &w);

    let exact_edges: Vec<[[T; 2]; 3]> = vec![
        // hexagon fan around the slit endpoint A = v
        [v_sub(&b_pt, &a_pt), p2.clone(), v_sub(&a_pt, &c_pt)],
        [v_sub(&c_pt, &a_pt), v_sub(v, &p1), v_neg(&p2)],
        [p2.clone(), v_neg(v), v_sub(v, &p2)],
        [v_sub(&e_pt, &a_pt), v_neg(&p2), v.clone()],
        // second torus parallelogram
        [v.clone(), w.clone(), v_neg(&vw)],
        [vw.clone(), v_neg(v), v_neg(&w)],
    ];
    let _ = (&d_pt, &e_pt);

    let gluing = [
        ((0, 2), (1, 0)), // hexagon diagonal A-C
        ((1, 2), (2, 0)), // hexagon diagonal A-D
        ((2, 2), (3, 0)), // hexagon diagonal A-E
        ((0, 1), (3, 1)), // torus-1 side
        ((0, 0), (1, 1)), // torus-1 top/bottom away from the slit
        ((3, 2), (5, 1)), // slit bank: torus-1 bottom to torus-2 top
        ((4, 0), (2, 1)), // slit bank: torus-2 bottom to torus-1 top
        ((4, 2), (5, 0)), // torus-2 diagonal
        ((4, 1), (5, 2)), // torus-2 side
    ];

    let triangles: Vec<Triangle> = exact_edges
        .iter()
        .map(|tri| Triangle { edges: [v_to_c(&tri[0]), v_to_c(&tri[1]), v_to_c(&tri[2])] })
        .collect();
    let surface = build_surface(triangles, &gluing, vec![2])?;
    Ok(ConnectedSum { surface, exact_edges })
}
