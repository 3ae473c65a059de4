//! Triangulated translation surfaces with period coordinates.
//!
//! A surface is a list of positively oriented triangles (three complex edge
//! vectors summing to zero) together with an involution pairing directed edge
//! slots; paired slots carry opposite vectors. Cone points are the vertex
//! classes of the resulting complex and must have total angle 2*pi*(order+1).
//!
//! Vertex classes are ordered by their smallest (triangle, corner) member and
//! `zero_orders[i]` refers to the i-th class in that order. With a single
//! zero the convention is invisible; it only matters for multi-zero data.

use crate::error::{Error, Result};
use crate::geom::{cross, C};
use crate::geom::Mat2;
use serde::{Deserialize, Serialize};

pub const GEOM_TOL: f64 = 1e-9;

/// A directed edge slot: triangle index and edge index (0..3).
pub type Slot = (usize, usize);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Triangle {
    pub edges: [C; 3],
}

impl Triangle {
    pub fn signed_area(&self) -> f64 {
        0.5 * cross(self.edges[0], self.edges[1])
    }

    /// Interior angle at vertex j, measured from the ray toward vertex j+1
    /// counterclockwise to the ray toward vertex j+2.
    pub fn corner_angle(&self, j: usize) -> f64 {
        let a = self.edges[j];
        let b = -self.edges[(j + 2) % 3];
        let raw = cross(a, b).atan2(crate::geom::dot(a, b));
        if raw <= 0.0 {
            raw + 2.0 * std::f64::consts::PI
        } else {
            raw
        }
    }

    pub fn max_edge_len(&self) -> f64 {
        self.edges.iter().map(|e| e.norm()).fold(0.0, f64::max)
    }

    pub fn min_altitude(&self) -> f64 {
        2.0 * self.signed_area() / self.max_edge_len()
    }
}

/// Combinatorial data derived from the gluing: undirected edge classes, a
/// spanning-tree homology basis and integer expansions of every class over
/// that basis.
#[derive(Debug, Clone)]
pub struct Topology {
    pub n_classes: usize,
    /// class id of each slot
    pub class_of: Vec<[usize; 3]>,
    /// +1 when the slot is the canonical (defining) direction of its class
    pub sign_of: Vec<[i8; 3]>,
    /// canonical slot first
    pub slots_of_class: Vec<(Slot, Slot)>,
    /// basis class ids, dimension 2g + |Sigma| - 1
    pub basis: Vec<usize>,
    /// expansion of each class over the basis (rows of length basis.len())
    pub expansion: Vec<Vec<i64>>,
    /// corners grouped by vertex class, each sorted, classes ordered by
    /// smallest member
    pub vertex_classes: Vec<Vec<Slot>>,
}

/// An element of H^1(M, Sigma; C) in basis coordinates: one complex value per
/// basis edge class.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodVector {
    pub coords: Vec<C>,
}

impl PeriodVector {
    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn zero(dim: usize) -> Self {
        PeriodVector { coords: vec![C::new(0.0, 0.0); dim] }
    }

    pub fn real_part(&self) -> Vec<f64> {
        self.coords.iter().map(|c| c.re).collect()
    }

    pub fn imag_part(&self) -> Vec<f64> {
        self.coords.iter().map(|c| c.im).collect()
    }

    pub fn add(&self, o: &PeriodVector) -> PeriodVector {
        PeriodVector { coords: self.coords.iter().zip(&o.coords).map(|(a, b)| a + b).collect() }
    }

    pub fn sub(&self, o: &PeriodVector) -> PeriodVector {
        PeriodVector { coords: self.coords.iter().zip(&o.coords).map(|(a, b)| a - b).collect() }
    }

    pub fn scale(&self, s: f64) -> PeriodVector {
        PeriodVector { coords: self.coords.iter().map(|a| a * s).collect() }
    }

    /// Apply a 2x2 real matrix to every coordinate (the linear action on
    /// R^2-coefficients).
    pub fn apply_gl2(&self, g: &Mat2) -> PeriodVector {
        PeriodVector { coords: self.coords.iter().map(|c| g.apply(*c)).collect() }
    }

    pub fn norm_sup(&self) -> f64 {
        self.coords.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }
}

/// JSON wire format: { "zero_orders": [...], "triangles": [[[re,im] x3]...],
/// "gluing": [[t,e,t2,e2]...] }.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SurfaceJson {
    pub zero_orders: Vec<usize>,
    pub triangles: Vec<[[f64; 2]; 3]>,
    pub gluing: Vec<[usize; 4]>,
}

#[derive(Debug, Clone)]
pub struct TranslationSurface {
    pub triangles: Vec<Triangle>,
    /// partner slot of each slot
    pub partner: Vec<[Slot; 3]>,
    pub zero_orders: Vec<usize>,
    pub topology: Topology,
}

/// Build and fully validate a surface from raw triangle/gluing data.
///
/// `gluing` lists each unordered pair of slots once (extra symmetric entries
/// are tolerated as long as they are consistent).
pub fn build_surface(
    triangles: Vec<Triangle>,
    gluing: &[(Slot, Slot)],
    zero_orders: Vec<usize>,
) -> Result<TranslationSurface> {
    let nt = triangles.len();
    let mut partner: Vec<[Option<Slot>; 3]> = vec![[None; 3]; nt];
    for &(a, b) in gluing {
        for &(t, e) in &[a, b] {
            if t >= nt || e >= 3 {
                return Err(Error::BadGluing { triangle: t, edge: e });
            }
        }
        if a == b {
            return Err(Error::BadGluing { triangle: a.0, edge: a.1 });
        }
        for (x, y) in [(a, b), (b, a)] {
            match partner[x.0][x.1] {
                None => partner[x.0][x.1] = Some(y),
                Some(p) if p == y => {}
                Some(_) => return Err(Error::BadGluing { triangle: x.0, edge: x.1 }),
            }
        }
    }
    let mut resolved = Vec::with_capacity(nt);
    for (t, row) in partner.iter().enumerate() {
        let mut out = [(0usize, 0usize); 3];
        for e in 0..3 {
            out[e] = row[e].ok_or(Error::BadGluing { triangle: t, edge: e })?;
        }
        resolved.push(out);
    }
    let surface = assemble(triangles, resolved, zero_orders)?;
    Ok(surface)
}

pub(crate) fn assemble(
    triangles: Vec<Triangle>,
    partner: Vec<[Slot; 3]>,
    zero_orders: Vec<usize>,
) -> Result<TranslationSurface> {
    validate_geometry(&triangles, &partner)?;
    let topology = build_topology(&partner)?;
    let surface = TranslationSurface { triangles, partner, zero_orders, topology };
    surface.validate_singularities()?;
    Ok(surface)
}

fn validate_geometry(triangles: &[Triangle], partner: &[[Slot; 3]]) -> Result<()> {
    let scale = triangles.iter().map(|t| t.max_edge_len()).fold(1.0, f64::max);
    for (i, tri) in triangles.iter().enumerate() {
        let s = tri.edges[0] + tri.edges[1] + tri.edges[2];
        if s.norm() > GEOM_TOL * scale {
            return Err(Error::ClosureViolation { triangle: i, re: s.re, im: s.im });
        }
        let area = tri.signed_area();
        if area <= 0.0 {
            return Err(Error::OrientationViolation { triangle: i, area });
        }
    }
    for t in 0..triangles.len() {
        for e in 0..3 {
            let (t2, e2) = partner[t][e];
            if partner[t2][e2] != (t, e) {
                return Err(Error::BadGluing { triangle: t, edge: e });
            }
            let gap = (triangles[t].edges[e] + triangles[t2].edges[e2]).norm();
            if gap > GEOM_TOL * scale {
                return Err(Error::GluingMismatch { triangle: t, edge: e, gap });
            }
        }
    }
    Ok(())
}

pub(crate) fn build_topology(partner: &[[Slot; 3]]) -> Result<Topology> {
    let nt = partner.len();
    // Undirected edge classes: canonical slot = lexicographically smaller.
    let mut class_of = vec![[usize::MAX; 3]; nt];
    let mut sign_of = vec![[0i8; 3]; nt];
    let mut slots_of_class = Vec::new();
    for t in 0..nt {
        for e in 0..3 {
            if class_of[t][e] != usize::MAX {
                continue;
            }
            let p = partner[t][e];
            let id = slots_of_class.len();
            class_of[t][e] = id;
            sign_of[t][e] = 1;
            class_of[p.0][p.1] = id;
            sign_of[p.0][p.1] = -1;
            slots_of_class.push(((t, e), p));
        }
    }
    let n_classes = slots_of_class.len();

    // Spanning tree of the dual graph (triangles as nodes, non-self-glued
    // classes as edges), BFS from triangle 0.
    let mut parent_edge: Vec<Option<usize>> = vec![None; nt]; // class to parent
    let mut visited = vec![false; nt];
    let mut order = Vec::new();
    visited[0] = true;
    let mut queue = std::collections::VecDeque::from([0usize]);
    while let Some(t) = queue.pop_front() {
        order.push(t);
        for e in 0..3 {
            let (t2, _) = partner[t][e];
            if t2 != t && !visited[t2] {
                visited[t2] = true;
                parent_edge[t2] = Some(class_of[t][e]);
                queue.push_back(t2);
            }
        }
    }
    if order.len() != nt {
        return Err(Error::Invalid("surface is not connected".into()));
    }

    let tree_classes: std::collections::HashSet<usize> =
        parent_edge.iter().flatten().copied().collect();
    let basis: Vec<usize> = (0..n_classes).filter(|c| !tree_classes.contains(c)).collect();
    let n = basis.len();
    let basis_index: std::collections::HashMap<usize, usize> =
        basis.iter().enumerate().map(|(i, &c)| (c, i)).collect();

    // Eliminate tree classes children-first: each non-root triangle's closure
    // relation expresses its parent-edge class over already known ones.
    let mut expansion: Vec<Option<Vec<i64>>> = vec![None; n_classes];
    for &c in &basis {
        let mut row = vec![0i64; n];
        row[basis_index[&c]] = 1;
        expansion[c] = Some(row);
    }
    for &t in order.iter().rev() {
        let Some(pc) = parent_edge[t] else { continue };
        // relation: sum over slots of sign * class = 0
        let mut rhs = vec![0i64; n];
        let mut pivot_sign = 0i64;
        for e in 0..3 {
            let c = class_of[t][e];
            let s = sign_of[t][e] as i64;
            if c == pc && pivot_sign == 0 {
                pivot_sign = s;
                continue;
            }
            let row = expansion[c]
                .as_ref()
                .ok_or_else(|| Error::Invalid("elimination order broke".into()))?;
            for (k, v) in row.iter().enumerate() {
                rhs[k] += s * v;
            }
        }
        // pivot_sign * x_pc + rhs = 0
        let row: Vec<i64> = rhs.iter().map(|v| -v * pivot_sign).collect();
        expansion[pc] = Some(row);
    }
    // Root relation must now be dependent.
    let root = order[0];
    let mut check = vec![0i64; n];
    for e in 0..3 {
        let c = class_of[root][e];
        let s = sign_of[root][e] as i64;
        let row = expansion[c].as_ref().unwrap();
        for (k, v) in row.iter().enumerate() {
            check[k] += s * v;
        }
    }
    if check.iter().any(|&v| v != 0) {
        return Err(Error::Invalid("face relations are not consistent".into()));
    }
    let expansion: Vec<Vec<i64>> = expansion.into_iter().map(|r| r.unwrap()).collect();

    // Vertex classes: walk corner (t,i) -> partner(t, i+2) = (t2,j) -> (t2,j).
    let mut corner_seen = vec![[false; 3]; nt];
    let mut vertex_classes = Vec::new();
    for t in 0..nt {
        for i in 0..3 {
            if corner_seen[t][i] {
                continue;
            }
            let mut cycle = Vec::new();
            let (mut ct, mut ci) = (t, i);
            loop {
                corner_seen[ct][ci] = true;
                cycle.push((ct, ci));
                let (nt2, nj) = partner[ct][(ci + 2) % 3];
                if (nt2, nj) == (t, i) {
                    break;
                }
                ct = nt2;
                ci = nj;
                if cycle.len() > 3 * nt {
                    return Err(Error::Invalid("vertex walk does not close".into()));
                }
            }
            cycle.sort_unstable();
            vertex_classes.push(cycle);
        }
    }
    vertex_classes.sort_by_key(|c| c[0]);

    Ok(Topology {
        n_classes,
        class_of,
        sign_of,
        slots_of_class,
        basis,
        expansion,
        vertex_classes,
    })
}

impl TranslationSurface {
    pub fn genus(&self) -> usize {
        (self.zero_orders.iter().sum::<usize>() + 2) / 2
    }

    pub fn n_zeros(&self) -> usize {
        self.zero_orders.len()
    }

    /// dim H_1(M, Sigma; Z) = 2g + |Sigma| - 1
    pub fn homology_dim(&self) -> usize {
        2 * self.genus() + self.n_zeros() - 1
    }

    fn validate_singularities(&self) -> Result<()> {
        let expected_triangles = 2 * self.zero_orders.iter().sum::<usize>() + 2 * self.n_zeros();
        if self.triangles.len() != expected_triangles
            || self.topology.vertex_classes.len() != self.n_zeros()
        {
            return Err(Error::EulerMismatch {
                triangles: self.triangles.len(),
                vertices: self.topology.vertex_classes.len(),
                expected_triangles,
            });
        }
        if self.topology.basis.len() != self.homology_dim() {
            return Err(Error::Invalid(format!(
                "homology basis has rank {}, expected {}",
                self.topology.basis.len(),
                self.homology_dim()
            )));
        }
        for (v, cycle) in self.topology.vertex_classes.iter().enumerate() {
            let angle: f64 = cycle.iter().map(|&(t, i)| self.triangles[t].corner_angle(i)).sum();
            let expected = 2.0 * std::f64::consts::PI * (self.zero_orders[v] as f64 + 1.0);
            if (angle - expected).abs() > 1e-9 * expected.max(1.0) {
                return Err(Error::ConeAngleMismatch { vertex: v, angle, expected });
            }
        }
        Ok(())
    }

    /// Revalidate every invariant; used after operations that rebuild data.
    pub fn validate(&self) -> Result<()> {
        validate_geometry(&self.triangles, &self.partner)?;
        self.validate_singularities()
    }

    pub fn area(&self) -> f64 {
        self.triangles.iter().map(|t| t.signed_area()).sum()
    }

    /// Geometric vector of an edge class (canonical direction).
    pub fn class_value(&self, class: usize) -> C {
        let ((t, e), _) = self.topology.slots_of_class[class];
        self.triangles[t].edges[e]
    }

    /// The surface's own period class over its homology basis.
    pub fn periods(&self) -> PeriodVector {
        PeriodVector {
            coords: self.topology.basis.iter().map(|&c| self.class_value(c)).collect(),
        }
    }

    /// Evaluate a cohomology vector on an edge class through the integer
    /// expansion.
    pub fn evaluate_on_class(&self, v: &PeriodVector, class: usize) -> C {
        let exp = &self.topology.expansion[class];
        let mut acc = C::new(0.0, 0.0);
        for (k, &coef) in exp.iter().enumerate() {
            if coef != 0 {
                acc += v.coords[k] * coef as f64;
            }
        }
        acc
    }

    /// Evaluate on an arbitrary integer homology vector in basis coordinates.
    pub fn evaluate_on_cycle(&self, v: &PeriodVector, cycle: &[i64]) -> C {
        let mut acc = C::new(0.0, 0.0);
        for (k, &coef) in cycle.iter().enumerate() {
            if coef != 0 {
                acc += v.coords[k] * coef as f64;
            }
        }
        acc
    }

    /// Apply g in GL2+(R) to every edge vector; gluing is unchanged.
    pub fn apply_gl2(&self, g: &Mat2) -> Result<TranslationSurface> {
        let det = g.det();
        if det <= 0.0 {
            return Err(Error::NonpositiveDeterminant { det });
        }
        let triangles: Vec<Triangle> = self
            .triangles
            .iter()
            .map(|t| Triangle { edges: [g.apply(t.edges[0]), g.apply(t.edges[1]), g.apply(t.edges[2])] })
            .collect();
        assemble(triangles, self.partner.clone(), self.zero_orders.clone())
    }

    /// Local inverse of the period map: same combinatorics, new geometry.
    pub fn rebuild_from_periods(&self, new_periods: &PeriodVector) -> Result<TranslationSurface> {
        if new_periods.dim() != self.homology_dim() {
            return Err(Error::Invalid(format!(
                "period vector has dimension {}, expected {}",
                new_periods.dim(),
                self.homology_dim()
            )));
        }
        let mut class_values = Vec::with_capacity(self.topology.n_classes);
        for c in 0..self.topology.n_classes {
            class_values.push(self.evaluate_on_class(new_periods, c));
        }
        let mut triangles = Vec::with_capacity(self.triangles.len());
        for (t, _) in self.triangles.iter().enumerate() {
            let mut edges = [C::new(0.0, 0.0); 3];
            for e in 0..3 {
                let c = self.topology.class_of[t][e];
                let s = self.topology.sign_of[t][e] as f64;
                edges[e] = class_values[c] * s;
            }
            let tri = Triangle { edges };
            if tri.signed_area() <= 0.0 {
                return Err(Error::DegenerateTriangle { triangle: t });
            }
            triangles.push(tri);
        }
        assemble(triangles, self.partner.clone(), self.zero_orders.clone())
    }

    /// Rescale so the flat area becomes 1 (the pi_1 normalization).
    pub fn normalize_area(&self) -> TranslationSurface {
        let s = 1.0 / self.area().sqrt();
        self.apply_gl2(&Mat2::new(s, 0.0, 0.0, s)).expect("scaling preserves validity")
    }

    pub fn to_json(&self) -> SurfaceJson {
        let mut gluing = Vec::new();
        for (t, row) in self.partner.iter().enumerate() {
            for (e, &(t2, e2)) in row.iter().enumerate() {
                if (t, e) < (t2, e2) {
                    gluing.push([t, e, t2, e2]);
                }
            }
        }
        SurfaceJson {
            zero_orders: self.zero_orders.clone(),
            triangles: self
                .triangles
                .iter()
                .map(|t| {
                    [
                        [t.edges[0].re, t.edges[0].im],
                        [t.edges[1].re, t.edges[1].im],
                        [t.edges[2].re, t.edges[2].im],
                    ]
                })
                .collect(),
            gluing,
        }
    }

    pub fn from_json(json: &SurfaceJson) -> Result<TranslationSurface> {
        let triangles: Vec<Triangle> = json
            .triangles
            .iter()
            .map(|t| Triangle {
                edges: [
                    C::new(t[0][0], t[0][1]),
                    C::new(t[1][0], t[1][1]),
                    C::new(t[2][0], t[2][1]),
                ],
            })
            .collect();
        let gluing: Vec<(Slot, Slot)> =
            json.gluing.iter().map(|g| ((g[0], g[1]), (g[2], g[3]))).collect();
        build_surface(triangles, &gluing, json.zero_orders.clone())
    }
}

/// The flat torus C / (Z v1 + Z v2) with one marked point, as two triangles.
pub fn torus(v1: C, v2: C) -> Result<TranslationSurface> {
    // Triangle A: edges v1, v2, -(v1+v2); triangle B: edges v1+v2, -v1, -v2.
    let ta = Triangle { edges: [v1, v2, -(v1 + v2)] };
    let tb = Triangle { edges: [v1 + v2, -v1, -v2] };
    let gluing = [
        ((0, 0), (1, 1)), // v1 with -v1
        ((0, 1), (1, 2)), // v2 with -v2
        ((0, 2), (1, 0)), // diagonal
    ];
    build_surface(vec![ta, tb], &gluing, vec![0])
}

/// The unit square torus.
pub fn square_torus() -> TranslationSurface {
    torus(C::new(1.0, 0.0), C::new(0.0, 1.0)).expect("unit torus is valid")
}
