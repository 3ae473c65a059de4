//! Translation equivalence, Veech group search, spherical function,
//! lattice-point counting, near-return scanning and plane discriminants.

use crate::delaunay::{canonical_form, delaunay, translation_equivalent};
use crate::error::{Error, Result};
use crate::geom::{right_invariant_dist, Mat2};
use crate::intlinalg::{integer_kernel, IntegralSubspace};
use crate::parallel::{par_map_collect, stream_seed};
use crate::quad::{nullspace, QuadElem, Scalar};
use crate::saddle::{saddle_connections, systole};
use crate::surface::TranslationSurface;
use num_bigint::BigInt;
use num_rational::BigRational;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Canonical-Delaunay comparison of two surfaces.
pub fn is_translation_equivalent(
    x: &TranslationSurface,
    y: &TranslationSurface,
    tol: f64,
) -> Result<bool> {
    if (x.area() - y.area()).abs() > tol * x.area().max(y.area()) {
        return Ok(false);
    }
    let (dx, _) = delaunay(x, 1_000_000)?;
    let (dy, _) = delaunay(y, 1_000_000)?;
    Ok(translation_equivalent(&dx, &dy, tol))
}

/// Result of a Veech group search. `elements` holds the found linear parts
/// with determinant near +1 (the identity always included); a translation
/// equivalence realizing -identity is reported separately.
#[derive(Debug, Clone)]
pub struct VeechSearch {
    pub elements: Vec<Mat2>,
    pub minus_identity: bool,
    pub candidates_tested: usize,
}

/// Search for Veech elements with max-entry norm at most `tmax` by matching
/// ordered pairs of short saddle connections.
pub fn veech_search(
    x: &TranslationSurface,
    tmax: f64,
    budget: usize,
) -> Result<VeechSearch> {
    let (x, _) = delaunay(x, 1_000_000)?;
    let sys = systole(&x);
    let cutoff = 2.0 * tmax / sys;
    let sc = saddle_connections(&x, cutoff, budget)?;
    let vecs: Vec<crate::geom::C> = sc.iter().map(|s| s.holonomy).collect();

    // candidate linear parts from pairs with matching determinant
    let (a1, a2) = {
        let mut base: Option<(usize, usize)> = None;
        'outer: for i in 0..vecs.len() {
            for j in 0..vecs.len() {
                if crate::geom::cross(vecs[i], vecs[j]) > 1e-9 {
                    base = Some((i, j));
                    break 'outer;
                }
            }
        }
        base.ok_or_else(|| Error::Invalid("no independent saddle connections".into()))?
    };
    let base_det = crate::geom::cross(vecs[a1], vecs[a2]);
    let base_inv = Mat2::new(vecs[a1].re, vecs[a2].re, vecs[a1].im, vecs[a2].im).inverse();

    let mut candidates: Vec<Mat2> = vec![Mat2::IDENTITY];
    let mut seen = std::collections::HashSet::new();
    let quant = |g: &Mat2| {
        let q = 1e-7;
        (
            (g.a / q).round() as i64,
            (g.b / q).round() as i64,
            (g.c / q).round() as i64,
            (g.d / q).round() as i64,
        )
    };
    seen.insert(quant(&Mat2::IDENTITY));
    for i in 0..vecs.len() {
        for j in 0..vecs.len() {
            let d = crate::geom::cross(vecs[i], vecs[j]);
            if (d - base_det).abs() > 1e-7 * base_det.abs().max(1.0) {
                continue;
            }
            let target = Mat2::new(vecs[i].re, vecs[j].re, vecs[i].im, vecs[j].im);
            let g = target.mul(&base_inv);
            if (g.det() - 1.0).abs() > 1e-6 || g.norm_entries() > tmax {
                continue;
            }
            if seen.insert(quant(&g)) {
                candidates.push(g);
            }
        }
    }
    if candidates.len() > budget {
        return Err(Error::BudgetExceeded { limit: budget });
    }

    let reference = canonical_form(&x);
    let verdicts = par_map_collect(candidates.len(), |k| {
        let g = candidates[k];
        let Ok(moved) = x.apply_gl2(&g) else { return false };
        let Ok((d, _)) = delaunay(&moved, 1_000_000) else { return false };
        canonical_form(&d) == reference || translation_equivalent(&d, &x, 1e-7)
    });
    let mut elements: Vec<Mat2> = candidates
        .iter()
        .zip(&verdicts)
        .filter(|(_, &ok)| ok)
        .map(|(g, _)| *g)
        .collect();
    // close under inverse within tolerance
    let mut extra = Vec::new();
    for g in &elements {
        let gi = g.inverse();
        if !elements.iter().any(|h| right_invariant_dist(h, &gi) < 1e-6) {
            if let Ok(moved) = x.apply_gl2(&gi) {
                if let Ok((d, _)) = delaunay(&moved, 1_000_000) {
                    if translation_equivalent(&d, &x, 1e-7) {
                        extra.push(gi);
                    }
                }
            }
        }
    }
    elements.extend(extra);
    let mut minus_identity = false;
    if let Ok(moved) = x.apply_gl2(&Mat2::new(-1.0, 0.0, 0.0, -1.0)) {
        if let Ok((d, _)) = delaunay(&moved, 1_000_000) {
            minus_identity = translation_equivalent(&d, &x, 1e-7);
        }
    }
    elements.retain(|g| right_invariant_dist(g, &Mat2::new(-1.0, 0.0, 0.0, -1.0)) > 1e-6);
    let tested = verdicts.len();
    elements.sort_by(|p, q| {
        p.dist_to_identity()
            .partial_cmp(&q.dist_to_identity())
            .unwrap()
            .then(p.a.partial_cmp(&q.a).unwrap())
            .then(p.b.partial_cmp(&q.b).unwrap())
    });
    Ok(VeechSearch { elements, minus_identity, candidates_tested: tested })
}

/// True when some element is hyperbolic: |trace| > 2 (strictly, beyond
/// tolerance).
pub fn contains_hyperbolic(gs: &[Mat2]) -> bool {
    gs.iter().any(|g| g.trace().abs() > 2.0 + 1e-9)
}

// ---------------------------------------------------------------------------
// Harish-Chandra spherical function

/// phi(a_t) = (1/2pi) int_0^{2pi} (e^t cos^2 + e^{-t} sin^2)^{-1/2}, computed
/// by adaptive Simpson quadrature to relative accuracy better than 1e-8.
pub fn spherical_function(t: f64) -> f64 {
    let t = t.abs();
    let f = |theta: f64| {
        let c = theta.cos();
        let s = theta.sin();
        1.0 / (t.exp() * c * c + (-t).exp() * s * s).sqrt()
    };
    // quarter-period symmetry
    let half = std::f64::consts::FRAC_PI_2;
    adaptive_simpson(&f, 0.0, half, 1e-10, 40) / half
}

/// phi at a group element through its Cartan projection (phi is bi-K
/// invariant); determinant-normalized.
pub fn spherical_at(g: &Mat2) -> f64 {
    let det = g.det();
    assert!(det > 0.0);
    let scale = det.sqrt();
    let normalized = Mat2::new(g.a / scale, g.b / scale, g.c / scale, g.d / scale);
    spherical_function(normalized.cartan_time())
}

fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: usize) -> f64 {
    fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> f64 {
        (b - a) / 6.0 * (f(a) + 4.0 * f(0.5 * (a + b)) + f(b))
    }
    fn rec(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        b: f64,
        whole: f64,
        tol: f64,
        depth: usize,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let left = simpson(f, a, m);
        let right = simpson(f, m, b);
        if depth == 0 || (left + right - whole).abs() < 15.0 * tol {
            left + right + (left + right - whole) / 15.0
        } else {
            rec(f, a, m, left, tol / 2.0, depth - 1) + rec(f, m, b, right, tol / 2.0, depth - 1)
        }
    }
    rec(f, a, b, simpson(f, a, b), tol, depth)
}

/// Monte-Carlo estimate of (1/Vol^2) * double integral of
/// phi(g1 g2^{-1})^{1/p} over the KAK ball of radius T, using the reduction
/// int_K phi(g1 k g2) dk = phi(g1) phi(g2) to sample only the Cartan parts
/// and one middle rotation.
pub fn spherical_volume_ratio(t_radius: f64, p: f64, n_mc: usize, seed: u64) -> f64 {
    assert!(t_radius >= 2.0 && p >= 1.0);
    let s_max = 2.0 * t_radius.ln();
    let cmax = s_max.cosh() - 1.0;
    let samples = par_map_collect(n_mc, |i| {
        let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(seed, i as u64));
        // Cartan radial density sinh(s) ds on [0, s_max]
        let mut draw_s = || {
            let u: f64 = rng.gen_range(0.0..1.0);
            (1.0 + u * cmax).acosh()
        };
        let s1 = draw_s();
        let s2 = draw_s();
        let theta: f64 = rng.gen_range(0.0..std::f64::consts::PI);
        let g = Mat2::geodesic(s1).mul(&Mat2::rotation(theta)).mul(&Mat2::geodesic(s2));
        spherical_at(&g).powf(1.0 / p)
    });
    samples.iter().sum::<f64>() / n_mc as f64
}

// ---------------------------------------------------------------------------
// group-ball counting

#[derive(Debug, Clone)]
pub struct GroupBallSpec {
    pub generators: Vec<Mat2>,
    /// norm-ball radius: ||g - id|| <= t
    pub t: f64,
    pub separation: f64,
    pub word_budget: usize,
}

/// Enumerate group elements of the generated group inside the norm ball by
/// breadth-first search over words, then greedily extract a maximal
/// separation-separated subset (in the right-invariant surrogate metric).
pub fn count_group_ball(spec: &GroupBallSpec) -> Result<(usize, Vec<Mat2>)> {
    let mut gens: Vec<Mat2> = Vec::new();
    for g in &spec.generators {
        gens.push(*g);
        gens.push(g.inverse());
    }
    let norm_cap = (spec.t + 2.0) * 4.0;
    let quant = |g: &Mat2| {
        let q = 1e-9;
        (
            (g.a / q).round() as i64,
            (g.b / q).round() as i64,
            (g.c / q).round() as i64,
            (g.d / q).round() as i64,
        )
    };
    let mut seen = std::collections::HashSet::new();
    let mut frontier = vec![Mat2::IDENTITY];
    seen.insert(quant(&Mat2::IDENTITY));
    let mut all = vec![Mat2::IDENTITY];
    while !frontier.is_empty() {
        let mut next = Vec::new();
        for g in &frontier {
            for h in &gens {
                let gh = h.mul(g);
                if gh.norm_entries() > norm_cap {
                    continue;
                }
                if seen.insert(quant(&gh)) {
                    next.push(gh);
                    all.push(gh);
                    if all.len() > spec.word_budget {
                        return Err(Error::WordBudgetExceeded { limit: spec.word_budget });
                    }
                }
            }
        }
        frontier = next;
    }
    let in_ball: Vec<Mat2> =
        all.into_iter().filter(|g| g.dist_to_identity() <= spec.t).collect();
    // deterministic greedy: closest to the identity first
    let mut ordered = in_ball;
    ordered.sort_by(|a, b| {
        a.dist_to_identity()
            .partial_cmp(&b.dist_to_identity())
            .unwrap()
            .then(a.a.partial_cmp(&b.a).unwrap())
            .then(a.b.partial_cmp(&b.b).unwrap())
            .then(a.c.partial_cmp(&b.c).unwrap())
    });
    let mut kept: Vec<Mat2> = Vec::new();
    for g in ordered {
        if kept.iter().all(|h| right_invariant_dist(&g, h) >= spec.separation - 1e-9) {
            kept.push(g);
        }
    }
    Ok((kept.len(), kept))
}

// ---------------------------------------------------------------------------
// near-return scanning

#[derive(Debug, Clone)]
pub struct NearReturn {
    pub g1: Mat2,
    pub g2: Mat2,
    pub distance: f64,
}

#[derive(Debug, Clone)]
pub struct NearReturnScan {
    pub pairs: Vec<NearReturn>,
    pub grid_points: usize,
    /// true when the grid cell diameter exceeds the detection threshold, so
    /// emptiness is a resolution statement rather than a dynamical one
    pub resolution_warning: bool,
}

/// One-chart AGY distance surrogate: when the Delaunay forms of the two
/// surfaces match combinatorially, the sup over matched edges of
/// |Delta edge| / |edge|; None (unknown) when no chart alignment exists.
pub fn one_chart_distance(a: &TranslationSurface, b: &TranslationSurface) -> Option<f64> {
    let (da, _) = delaunay(a, 1_000_000).ok()?;
    let (db, _) = delaunay(b, 1_000_000).ok()?;
    crate::delaunay::best_alignment_distance(&da, &db)
}

/// Grid-sample B_G(T) in lower*diag*upper coordinates and report 1-separated
/// pairs whose surfaces are within T^{-N} in one-chart AGY distance.
pub fn near_return_scan(
    x: &TranslationSurface,
    t_radius: f64,
    n_exponent: f64,
    grid_step: f64,
) -> Result<NearReturnScan> {
    if grid_step <= 0.0 || grid_step > t_radius {
        return Err(Error::ResolutionTooCoarse {
            spacing: grid_step,
            required: t_radius,
        });
    }
    let threshold = t_radius.powf(-n_exponent);
    let tmax = 2.0 * (t_radius + 1.0).ln();
    let mut points: Vec<Mat2> = Vec::new();
    let mut ti = -tmax;
    while ti <= tmax {
        let reach = (t_radius + 1.0) * (-ti / 2.0).exp();
        let mut s = -reach;
        while s <= reach {
            let mut r = -reach;
            while r <= reach {
                let g = Mat2::opposite_horocycle(s)
                    .mul(&Mat2::geodesic(ti))
                    .mul(&Mat2::horocycle(r));
                if g.dist_to_identity() <= t_radius {
                    points.push(g);
                }
                r += grid_step;
            }
            s += grid_step;
        }
        ti += grid_step;
    }
    // bucket by a cheap isometry invariant at threshold resolution
    let surfaces: Vec<Option<TranslationSurface>> = par_map_collect(points.len(), |i| {
        let moved = x.apply_gl2(&points[i]).ok()?;
        delaunay(&moved, 1_000_000).ok().map(|(d, _)| d)
    });
    let key_of = |s: &TranslationSurface| -> Vec<i64> {
        let q = (threshold * 10.0).max(1e-12);
        let mut lens: Vec<i64> = s
            .triangles
            .iter()
            .flat_map(|t| t.edges.iter().map(|e| (e.norm() / q).round() as i64))
            .collect();
        lens.sort_unstable();
        lens
    };
    let mut buckets: std::collections::HashMap<Vec<i64>, Vec<usize>> =
        std::collections::HashMap::new();
    for (i, s) in surfaces.iter().enumerate() {
        if let Some(s) = s {
            buckets.entry(key_of(s)).or_default().push(i);
        }
    }
    let mut pairs = Vec::new();
    let mut keys: Vec<_> = buckets.keys().cloned().collect();
    keys.sort();
    for k in keys {
        let members = &buckets[&k];
        for ai in 0..members.len() {
            for bi in ai + 1..members.len() {
                let (i, j) = (members[ai], members[bi]);
                if right_invariant_dist(&points[i], &points[j]) < 1.0 {
                    continue;
                }
                let (Some(si), Some(sj)) = (&surfaces[i], &surfaces[j]) else { continue };
                if let Some(d) = crate::delaunay::best_alignment_distance(si, sj) {
                    if d < threshold {
                        pairs.push(NearReturn { g1: points[i], g2: points[j], distance: d });
                    }
                }
            }
        }
    }
    Ok(NearReturnScan {
        pairs,
        grid_points: points.len(),
        resolution_warning: grid_step > threshold,
    })
}

// ---------------------------------------------------------------------------
// plane discriminants

/// Exact coordinates of the tautological plane over the homology basis.
#[derive(Debug, Clone)]
pub struct ExactPlane {
    pub re: Vec<QuadElem>,
    pub im: Vec<QuadElem>,
}

/// Symplectic complement of the plane spanned by two exact vectors.
fn symplectic_complement(
    re: &[QuadElem],
    im: &[QuadElem],
    j: &[Vec<i64>],
) -> Result<Vec<Vec<QuadElem>>> {
    let n = re.len();
    let template = re[0].clone();
    let int = |v: i64| template.like_int(v);
    let mut rows = Vec::new();
    for v in [re, im] {
        let mut row = vec![int(0); n];
        for (jj, r) in row.iter_mut().enumerate() {
            let mut acc = int(0);
            for i in 0..n {
                if j[i][jj] != 0 {
                    acc = acc.add(&v[i].mul(&int(j[i][jj])));
                }
            }
            *r = acc;
        }
        rows.push(row);
    }
    let complement = nullspace(&rows, n, &template);
    if complement.len() != n - 2 {
        return Err(Error::DegeneratePlane { area: 0.0 });
    }
    Ok(complement)
}

/// Basis over the coefficient field of { X : X^T J + J X = 0, X u = 0 for
/// all u in `killed` }.
fn kill_solutions(killed: &[Vec<QuadElem>], j: &[Vec<i64>], n: usize) -> Vec<Vec<QuadElem>> {
    let template = killed[0][0].clone();
    let int = |v: i64| template.like_int(v);
    let idx = |i: usize, jj: usize| i * n + jj;
    let mut eqs: Vec<Vec<QuadElem>> = Vec::new();
    // (X^T J + J X)_{p,q} = sum_i X[i][p] J[i][q] + sum_l J[p][l] X[l][q]
    for p in 0..n {
        for q in 0..n {
            let mut row = vec![int(0); n * n];
            for i in 0..n {
                if j[i][q] != 0 {
                    row[idx(i, p)] = row[idx(i, p)].add(&int(j[i][q]));
                }
                if j[p][i] != 0 {
                    row[idx(i, q)] = row[idx(i, q)].add(&int(j[p][i]));
                }
            }
            eqs.push(row);
        }
    }
    for u in killed {
        for i in 0..n {
            let mut row = vec![int(0); n * n];
            for (jj, uj) in u.iter().enumerate() {
                row[idx(i, jj)] = uj.clone();
            }
            eqs.push(row);
        }
    }
    nullspace(&eqs, n * n, &template)
}

/// Height of the saturated integer lattice inside the rational span of the
/// given field solutions (each split into rational and lambda parts).
fn hull_height(solutions: &[Vec<QuadElem>], n: usize) -> Result<f64> {
    if solutions.is_empty() {
        return Err(Error::IrrationalPlane);
    }
    let mut rational_rows: Vec<Vec<BigRational>> = Vec::new();
    for x in solutions {
        let p_part: Vec<BigRational> = x.iter().map(|e| e.p.clone()).collect();
        let q_part: Vec<BigRational> = x.iter().map(|e| e.q.clone()).collect();
        for part in [p_part, q_part] {
            if part.iter().any(|c| !num_traits::Zero::is_zero(c)) {
                rational_rows.push(part);
            }
        }
    }
    let template_q = BigRational::from(BigInt::from(1));
    let hull_equations = nullspace(&rational_rows, n * n, &template_q);
    // saturated lattice = kernel of v -> v * E with columns = equations
    let ncols = hull_equations.len();
    let mut a: Vec<Vec<BigInt>> = vec![Vec::with_capacity(ncols); n * n];
    for eq in &hull_equations {
        let lcm = eq.iter().fold(BigInt::from(1), |acc, c| {
            num_integer::Integer::lcm(&acc, c.denom())
        });
        for (i, c) in eq.iter().enumerate() {
            a[i].push(c.numer() * (&lcm / c.denom()));
        }
    }
    let lattice = if ncols == 0 {
        IntegralSubspace::full(n * n).basis
    } else {
        integer_kernel(&a, n * n, ncols)
    };
    let sub = IntegralSubspace::from_rows(lattice, n * n)?;
    Ok(sub.height())
}

/// Height of the rational hull of the Lie algebra
/// { X : X^T J + J X = 0, X annihilates the symplectic complement of the
/// plane }, saturated inside the integer matrix lattice. For an irrational
/// quadratic plane the hull automatically contains the Galois-conjugate
/// block; for a rational plane it is the bare stabilizer block.
pub fn discriminant_of_plane(re: &[QuadElem], im: &[QuadElem], j: &[Vec<i64>]) -> Result<f64> {
    let n = re.len();
    assert_eq!(n, j.len());
    let complement = symplectic_complement(re, im, j)?;
    let solutions = kill_solutions(&complement, j, n);
    hull_height(&solutions, n)
}

/// Discriminant of a plane defined over the quadratic order: the hull of the
/// stabilizer block over both embeddings of the order. Over a non-square
/// discriminant the second embedding is the Galois conjugate and is already
/// contained in the rational hull; over a square discriminant the order
/// splits as Q x Q and the conjugate block (which kills the plane instead of
/// its complement) is added explicitly, keeping the lattice 6-dimensional
/// across the whole family.
pub fn discriminant_of_order_plane(
    re: &[QuadElem],
    im: &[QuadElem],
    j: &[Vec<i64>],
) -> Result<f64> {
    let n = re.len();
    let complement = symplectic_complement(re, im, j)?;
    let mut solutions = kill_solutions(&complement, j, n);
    let modulus = re[0].modulus;
    let d = modulus.discriminant();
    let sq = (d as f64).sqrt().round() as i64;
    if sq * sq == d {
        let plane: Vec<Vec<QuadElem>> = vec![re.to_vec(), im.to_vec()];
        solutions.extend(kill_solutions(&plane, j, n));
    }
    hull_height(&solutions, n)
}

/// Discriminant of the tautological plane of a surface. Requires an exact
/// quadratic-field structure for the plane; generic float planes carry none.
pub fn plane_discriminant(
    surface: &TranslationSurface,
    exact: Option<&ExactPlane>,
) -> Result<f64> {
    let Some(plane) = exact else {
        return Err(Error::IrrationalPlane);
    };
    let j = crate::homology::intersection_matrix(surface)?;
    discriminant_of_order_plane(&plane.re, &plane.im, &j)
}

/// Exact plane of a prototypical surface, read off the exact edges of its
/// connected sum.
pub fn prototype_exact_plane(
    sum: &crate::lattice::ConnectedSum<QuadElem>,
) -> ExactPlane {
    let topo = &sum.surface.topology;
    let mut re = Vec::new();
    let mut im = Vec::new();
    for &class in &topo.basis {
        let ((t, e), _) = topo.slots_of_class[class];
        re.push(sum.exact_edges[t][e][0].clone());
        im.push(sum.exact_edges[t][e][1].clone());
    }
    ExactPlane { re, im }
}
