//! McMullen prototypes of Weierstrass curves: enumeration, exact prototypical
//! splittings and component counts.

use crate::error::{Error, Result};
use crate::surface::TranslationSurface;
use crate::lattice::{connected_sum, ConnectedSum, Lattice2D, SlitTriple};
use crate::quad::{QuadElem, QuadModulus};
use num_bigint::BigInt;
use num_rational::BigRational;

/// Integer quadruple (a, b, c, e) with discriminant D = e^2 + 4bc subject to
/// b > 0, c > 0, 0 <= a < gcd(b, c), c + e < b, gcd(a, b, c, e) = 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Prototype {
    pub a: i64,
    pub b: i64,
    pub c: i64,
    pub e: i64,
}

impl Prototype {
    pub fn discriminant(&self) -> i64 {
        self.e * self.e + 4 * self.b * self.c
    }

    pub fn check(&self) -> Result<()> {
        let Prototype { a, b, c, e } = *self;
        let ok = b > 0
            && c > 0
            && a >= 0
            && a < gcd(b, c)
            && c + e < b
            && gcd(gcd(a, b), gcd(c, e)) == 1
            && self.discriminant() >= 5;
        if ok {
            Ok(())
        } else {
            Err(Error::Invalid(format!("({a},{b},{c},{e}) is not a prototype")))
        }
    }
}

fn gcd(a: i64, b: i64) -> i64 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

pub fn valid_discriminant(d: i64) -> Result<()> {
    if d >= 5 && (d.rem_euclid(4) == 0 || d.rem_euclid(4) == 1) {
        Ok(())
    } else {
        Err(Error::BadDiscriminant { d })
    }
}

/// All prototypes of discriminant d, lexicographically ordered on (e,b,c,a).
pub fn enumerate_prototypes(d: i64) -> Result<Vec<Prototype>> {
    valid_discriminant(d)?;
    let mut out = Vec::new();
    let emax = (d as f64).sqrt() as i64 + 1;
    for e in -emax..=emax {
        let rem = d - e * e;
        if rem <= 0 || rem % 4 != 0 {
            continue;
        }
        let bc = rem / 4;
        for b in 1..=bc {
            if bc % b != 0 {
                continue;
            }
            let c = bc / b;
            if c + e >= b {
                continue;
            }
            for a in 0..gcd(b, c) {
                if gcd(gcd(a, b), gcd(c, e)) == 1 {
                    out.push(Prototype { a, b, c, e });
                }
            }
        }
    }
    out.sort_by_key(|p| (p.e, p.b, p.c, p.a));
    Ok(out)
}

/// All real-multiplication triples (e, l, m) with d = e^2 + 4 l^2 m, l, m > 0
/// and gcd(e, l) = 1, ordered lexicographically.
pub fn enumerate_triples(d: i64) -> Result<Vec<(i64, i64, i64)>> {
    valid_discriminant(d)?;
    let mut out = Vec::new();
    let emax = (d as f64).sqrt() as i64 + 1;
    for e in -emax..=emax {
        let rem = d - e * e;
        if rem <= 0 || rem % 4 != 0 {
            continue;
        }
        let sq = rem / 4;
        let mut l = 1;
        while l * l <= sq {
            if sq % (l * l) == 0 && gcd(e, l) == 1 {
                out.push((e, l, sq / (l * l)));
            }
            l += 1;
        }
    }
    out.sort_unstable();
    Ok(out)
}

/// Number of components of the Weierstrass locus: two exactly when
/// d = 1 mod 8 and d != 9, one otherwise.
pub fn component_count(d: i64) -> Result<u32> {
    valid_discriminant(d)?;
    Ok(if d.rem_euclid(8) == 1 && d != 9 { 2 } else { 1 })
}

/// The prototypical splitting of a prototype, in exact arithmetic:
/// Lambda1 = Z(b,0) + Z(a,c), Lambda2 = lambda Z^2, slit (lambda, 0) with
/// lambda = (e + sqrt(D))/2. The defining condition c + e < b is equivalent
/// to lambda < b, which is re-verified exactly.
pub fn prototype_splitting(p: &Prototype) -> Result<SlitTriple<QuadElem>> {
    p.check()?;
    let m = QuadModulus::new(p.e, p.b * p.c);
    let int = |n: i64| QuadElem::from_int(n, m);
    let lambda = QuadElem::lambda(m);
    // exact check lambda < b
    if lambda.sub(&int(p.b)).sign() >= 0 {
        return Err(Error::Invalid(format!(
            "slit length is not shorter than the torus edge for ({},{},{},{})",
            p.a, p.b, p.c, p.e
        )));
    }
    if lambda.sign() <= 0 {
        return Err(Error::Invalid("slit length is not positive".into()));
    }
    Ok(SlitTriple {
        lat1: Lattice2D::new([int(p.b), int(0)], [int(p.a), int(p.c)]),
        lat2: Lattice2D::new([lambda.clone(), int(0)], [int(0), lambda.clone()]),
        slit: [lambda, int(0)],
    })
}

/// Exact connected sum of the prototypical splitting. The float surface is
/// fully validated; the exact edges allow exact area and period extraction.
pub fn prototype_surface(p: &Prototype) -> Result<(SlitTriple<QuadElem>, ConnectedSum<QuadElem>)> {
    let triple = prototype_splitting(p)?;
    let sum = connected_sum(&triple)?;
    Ok((triple, sum))
}

/// A generic area-one H(2) surface: the prototypical surface with its period
/// coordinates perturbed by a seeded random complex vector, scaled down until
/// the rebuild stays nondegenerate, then renormalized and retriangulated.
pub fn perturbed_prototype_surface(
    p: &Prototype,
    seed: u64,
    rel_magnitude: f64,
) -> Result<TranslationSurface> {
    use rand::{Rng, SeedableRng};
    let (_, sum) = prototype_surface(p)?;
    let base = sum.surface.normalize_area();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let periods = base.periods();
    let noise: Vec<crate::geom::C> = (0..periods.dim())
        .map(|_| crate::geom::C::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect();
    let mut scale = rel_magnitude;
    for _ in 0..40 {
        let coords: Vec<crate::geom::C> = periods
            .coords
            .iter()
            .zip(&noise)
            .map(|(c, n)| c + n * scale)
            .collect();
        if let Ok(s) = base.rebuild_from_periods(&crate::surface::PeriodVector { coords }) {
            let (d, _) = crate::delaunay::delaunay(&s.normalize_area(), 100_000)?;
            return Ok(d);
        }
        scale *= 0.5;
    }
    Err(Error::Invalid("could not perturb the prototype surface".into()))
}

/// Exact area bc + lambda^2 of the prototypical surface.
pub fn prototype_area_exact(p: &Prototype) -> QuadElem {
    let m = QuadModulus::new(p.e, p.b * p.c);
    let lambda = QuadElem::lambda(m);
    let bc = QuadElem::from_rational(
        BigRational::from(BigInt::from(p.b * p.c)),
        m,
    );
    bc.add(&lambda.mul(&lambda))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// independent exhaustive oracle: scan the raw (a,b,c,e) box
    fn oracle_prototypes(d: i64) -> Vec<Prototype> {
        let mut out = Vec::new();
        for b in 1..=d {
            for c in 1..=d {
                if 4 * b * c > d {
                    continue;
                }
                for e in -d..=d {
                    if e * e + 4 * b * c != d || c + e >= b {
                        continue;
                    }
                    for a in 0..b.min(c) {
                        let g = gcd(b, c);
                        if a < g && gcd(gcd(a, b), gcd(c, e)) == 1 {
                            out.push(Prototype { a, b, c, e });
                        }
                    }
                }
            }
        }
        out.sort_by_key(|p| (p.e, p.b, p.c, p.a));
        out
    }

    #[test]
    fn d5_and_d8_lists() {
        assert_eq!(
            enumerate_prototypes(5).unwrap(),
            vec![Prototype { a: 0, b: 1, c: 1, e: -1 }]
        );
        assert_eq!(
            enumerate_prototypes(8).unwrap(),
            vec![Prototype { a: 0, b: 1, c: 1, e: -2 }, Prototype { a: 0, b: 2, c: 1, e: 0 }]
        );
    }

    #[test]
    fn matches_oracle_up_to_60() {
        for d in 5..=60 {
            if valid_discriminant(d).is_err() {
                continue;
            }
            assert_eq!(enumerate_prototypes(d).unwrap(), oracle_prototypes(d), "d = {d}");
        }
    }

    #[test]
    fn multiples_of_four_contain_standard_prototype() {
        for d in (8..=200).step_by(4) {
            let list = enumerate_prototypes(d).unwrap();
            assert!(
                list.contains(&Prototype { a: 0, b: d / 4, c: 1, e: 0 }),
                "d = {d} misses (0,{},1,0)",
                d / 4
            );
        }
    }

    #[test]
    fn triples_small_discriminants() {
        assert_eq!(enumerate_triples(5).unwrap(), vec![(-1, 1, 1), (1, 1, 1)]);
        assert_eq!(enumerate_triples(8).unwrap(), vec![(-2, 1, 1), (0, 1, 2), (2, 1, 1)]);
        // (0, 1, d/4) is present whenever 4 | d
        for d in (8..=100).step_by(4) {
            assert!(enumerate_triples(d).unwrap().contains(&(0, 1, d / 4)));
        }
    }

    #[test]
    fn component_counts() {
        assert_eq!(component_count(17).unwrap(), 2);
        assert_eq!(component_count(9).unwrap(), 1);
        assert_eq!(component_count(8).unwrap(), 1);
        assert_eq!(component_count(33).unwrap(), 2);
        assert!(component_count(7).is_err());
        assert!(component_count(4).is_err());
    }

    #[test]
    fn d8_prototype_surface_area() {
        let p = Prototype { a: 0, b: 2, c: 1, e: 0 };
        let (_, sum) = prototype_surface(&p).unwrap();
        assert!((sum.surface.area() - 4.0).abs() < 1e-9);
        // exact: area = bc + lambda^2 = 2 + 2 = 4
        assert!((prototype_area_exact(&p).to_f64() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn d5_slit_shorter_than_edge() {
        let p = Prototype { a: 0, b: 1, c: 1, e: -1 };
        let triple = prototype_splitting(&p).unwrap();
        // lambda = (-1 + sqrt 5)/2 ~ 0.618 < 1
        assert!((triple.slit[0].to_f64() - 0.6180339887498949).abs() < 1e-12);
        let (_, sum) = prototype_surface(&p).unwrap();
        sum.surface.validate().unwrap();
    }

    #[test]
    fn exact_area_equals_triangle_area_for_many_d() {
        for d in [5i64, 8, 9, 12, 13, 16, 17, 20, 21, 24] {
            for p in enumerate_prototypes(d).unwrap() {
                let (_, sum) = prototype_surface(&p).unwrap();
                let exact = prototype_area_exact(&p).to_f64();
                assert!(
                    (sum.surface.area() - exact).abs() < 1e-9,
                    "area mismatch for {p:?}"
                );
            }
        }
    }
}
