//! Saddle connection enumeration by breadth-first unfolding of the
//! triangulation, and the systole.
//!
//! From every triangle corner we develop the surface into the plane and
//! search the corner's angular wedge. A located vertex blocks its direction
//! (a farther point on the same ray is not a geodesic segment with singular
//! endpoints and clean interior), so wedges split exclusively at every found
//! vertex. Integer multiples of each holonomy are appended afterwards: on
//! tori this makes counts unambiguous, and the ratio |c(gamma)|/|hol(gamma)|
//! the norm layer consumes is unchanged by multiplicity.

use crate::error::{Error, Result};
use crate::geom::{cross, dot, C};
use crate::surface::{Slot, TranslationSurface};

#[derive(Debug, Clone, PartialEq)]
pub struct SaddleConnection {
    pub holonomy: C,
    /// relative homology class in basis coordinates
    pub class: Vec<i64>,
}

struct Search<'a> {
    s: &'a TranslationSurface,
    bound: f64,
    budget: usize,
    visited: usize,
    truncated: bool,
    found: Vec<SaddleConnection>,
}

fn dist_origin_segment(a: C, b: C) -> f64 {
    let ab = b - a;
    let t = -dot(a, ab) / dot(ab, ab);
    let t = t.clamp(0.0, 1.0);
    (a + ab * t).norm()
}

struct Frame {
    slot: Slot,
    pl: C,
    cl: Vec<i64>,
    pr: C,
    cr: Vec<i64>,
    lo: C,
    hi: C,
}

impl<'a> Search<'a> {
    fn slot_class_vec(&self, (t, e): Slot) -> Vec<i64> {
        let topo = &self.s.topology;
        let sgn = topo.sign_of[t][e] as i64;
        topo.expansion[topo.class_of[t][e]].iter().map(|&v| v * sgn).collect()
    }

    fn slot_value(&self, (t, e): Slot) -> C {
        self.s.triangles[t].edges[e]
    }

    fn record(&mut self, hol: C, class: Vec<i64>) {
        self.found.push(SaddleConnection { holonomy: hol, class });
    }

    /// Search across the open segment (pl, pr) = `slot` of its triangle, with
    /// directions restricted to the open cone (lo, hi). Explicit worklist:
    /// the strips can run thousands of triangles deep.
    fn cross(&mut self, start: Frame) {
        let mut stack = vec![start];
        while let Some(f) = stack.pop() {
            if self.truncated || cross(f.lo, f.hi) <= 0.0 {
                continue;
            }
            if dist_origin_segment(f.pl, f.pr) > self.bound {
                continue;
            }
            self.visited += 1;
            if self.visited > self.budget {
                self.truncated = true;
                continue;
            }
            let (t1, e1) = f.slot;
            let (t2, e2) = self.s.partner[t1][e1];
            let mid = (t2, (e2 + 1) % 3);
            let apex = f.pl + self.slot_value(mid);
            let mut capex = self.slot_class_vec(mid);
            for (a, b) in capex.iter_mut().zip(&f.cl) {
                *a += b;
            }
            if apex.norm() <= self.bound && cross(f.lo, apex) > 0.0 && cross(apex, f.hi) > 0.0 {
                self.record(apex, capex.clone());
            }
            // left cone (pl, apex) through slot (t2, e2+1)
            let llo = if cross(f.lo, f.pl) > 0.0 { f.pl } else { f.lo };
            let lhi = if cross(apex, f.hi) > 0.0 { apex } else { f.hi };
            // right cone (apex, pr) through slot (t2, e2+2)
            let rlo = if cross(f.lo, apex) > 0.0 { apex } else { f.lo };
            let rhi = if cross(f.pr, f.hi) > 0.0 { f.pr } else { f.hi };
            stack.push(Frame {
                slot: (t2, (e2 + 2) % 3),
                pl: apex,
                cl: capex.clone(),
                pr: f.pr,
                cr: f.cr,
                lo: rlo,
                hi: rhi,
            });
            stack.push(Frame { slot: mid, pl: f.pl, cl: f.cl, pr: apex, cr: capex, lo: llo, hi: lhi });
        }
    }
}

/// Enumerate saddle connections up to `bound`; the flag reports whether the
/// search ran to completion within the node budget.
pub fn saddle_connections_capped(
    s: &TranslationSurface,
    bound: f64,
    budget: usize,
) -> (Vec<SaddleConnection>, bool) {
    if bound <= 0.0 {
        return (Vec::new(), true);
    }
    let mut search = Search { s, bound, budget, visited: 0, truncated: false, found: Vec::new() };
    for t in 0..s.triangles.len() {
        for v in 0..3 {
            // corner v: vertex v+1 sits on the wedge's low boundary
            let p1 = search.slot_value((t, v));
            let c1 = search.slot_class_vec((t, v));
            let mut c2 = search.slot_class_vec((t, (v + 1) % 3));
            for (a, b) in c2.iter_mut().zip(&c1) {
                *a += b;
            }
            let p2 = p1 + search.slot_value((t, (v + 1) % 3));
            if p1.norm() <= bound {
                search.record(p1, c1.clone());
            }
            search.cross(Frame {
                slot: (t, (v + 1) % 3),
                pl: p1,
                cl: c1,
                pr: p2,
                cr: c2,
                lo: p1,
                hi: p2,
            });
        }
    }
    let complete = !search.truncated;
    (postprocess(search.found, bound), complete)
}

/// Complete list of saddle-connection holonomy vectors of length <= bound,
/// each with its relative homology class, integer multiples included.
pub fn saddle_connections(
    s: &TranslationSurface,
    bound: f64,
    budget: usize,
) -> Result<Vec<SaddleConnection>> {
    let (found, complete) = saddle_connections_capped(s, bound, budget);
    if !complete {
        return Err(Error::BudgetExceeded { limit: budget });
    }
    Ok(found)
}

fn postprocess(found: Vec<SaddleConnection>, bound: f64) -> Vec<SaddleConnection> {
    // dedup (distinct corners can re-derive an edge-aligned connection)
    let mut found = found;
    let quant = |c: C| ((c.re * 1e9).round() as i64, (c.im * 1e9).round() as i64);
    let mut seen = std::collections::HashSet::new();
    found.retain(|sc| seen.insert((sc.class.clone(), quant(sc.holonomy))));
    // integer multiples up to the bound
    let mut multiples = Vec::new();
    for sc in &found {
        let mut k = 2.0;
        while sc.holonomy.norm() * k <= bound {
            let class = sc.class.iter().map(|&v| v * k as i64).collect();
            multiples.push(SaddleConnection { holonomy: sc.holonomy * k, class });
            k += 1.0;
        }
    }
    found.extend(multiples);
    let mut seen = std::collections::HashSet::new();
    found.retain(|sc| seen.insert((sc.class.clone(), quant(sc.holonomy))));
    found.sort_by(|a, b| {
        a.holonomy
            .norm()
            .partial_cmp(&b.holonomy.norm())
            .unwrap()
            .then_with(|| a.class.cmp(&b.class))
    });
    found
}

/// Minimal saddle-connection length. The shortest connection is realized by a
/// triangulation edge of some geodesic triangulation, so searching up to the
/// shortest current edge length suffices.
pub fn systole(s: &TranslationSurface) -> f64 {
    let min_edge = s
        .triangles
        .iter()
        .flat_map(|t| t.edges.iter().map(|e| e.norm()))
        .fold(f64::INFINITY, f64::min);
    let mut bound = min_edge * (1.0 + 1e-12);
    loop {
        let (list, complete) = saddle_connections_capped(s, bound, 10_000_000);
        if let Some(first) = list.first() {
            return first.holonomy.norm();
        }
        if !complete {
            // the shortest triangulation edge is always an upper bound
            return min_edge;
        }
        bound *= 2.0;
    }
}
