use thiserror::Error;

/// Errors shared across the crate. Variants carry enough context to name the
/// offending triangle, vertex or lattice point in diagnostics.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("triangle {triangle}: edge vectors sum to ({re:.3e},{im:.3e}), not zero")]
    ClosureViolation { triangle: usize, re: f64, im: f64 },

    #[error("triangle {triangle}: signed area {area:.3e} is not positive")]
    OrientationViolation { triangle: usize, area: f64 },

    #[error("gluing mismatch at triangle {triangle} edge {edge}: partner vector is not opposite (gap {gap:.3e})")]
    GluingMismatch { triangle: usize, edge: usize, gap: f64 },

    #[error("gluing is not an involution on directed edge slots (slot {triangle}.{edge})")]
    BadGluing { triangle: usize, edge: usize },

    #[error("vertex class {vertex}: cone angle {angle:.6} != 2*pi*(order+1) = {expected:.6}")]
    ConeAngleMismatch { vertex: usize, angle: f64, expected: f64 },

    #[error("surface has {triangles} triangles and {vertices} vertex classes, expected {expected_triangles} triangles for the declared zero orders")]
    EulerMismatch { triangles: usize, vertices: usize, expected_triangles: usize },

    #[error("matrix determinant {det:.3e} is not positive")]
    NonpositiveDeterminant { det: f64 },

    #[error("flip limit {limit} exceeded during Delaunay retriangulation")]
    FlipLimitExceeded { limit: usize },

    #[error("candidate budget {limit} exceeded")]
    BudgetExceeded { limit: usize },

    #[error("triangle {triangle} collapsed or flipped orientation under the requested periods")]
    DegenerateTriangle { triangle: usize },

    #[error("tautological plane is symplectically degenerate (area {area:.3e})")]
    DegeneratePlane { area: f64 },

    #[error("upper-left entry is zero; no lower*diag*upper factorization")]
    ZeroCorner,

    #[error("slit [0,v] passes through lattice point ({x:.6},{y:.6}) of lattice {lattice}")]
    SlitHitsLattice { lattice: usize, x: f64, y: f64 },

    #[error("{d} is not a valid discriminant (need d >= 5 and d = 0 or 1 mod 4)")]
    BadDiscriminant { d: i64 },

    #[error("point is not in the skeleton (nearest bone residual {residual:.3e})")]
    NotInSkeleton { residual: f64 },

    #[error("sample spacing {spacing:.3e} exceeds required resolution {required:.3e}")]
    ResolutionTooCoarse { spacing: f64, required: f64 },

    #[error("bootstrap spine stopped growing for {iterations} iterations")]
    LoopStalled { iterations: usize },

    #[error("basis does not span a saturated sublattice (index {index})")]
    NotSaturated { index: u64 },

    #[error("tautological plane carries no rational structure; supply exact coordinates")]
    IrrationalPlane,

    #[error("word budget {limit} exceeded before the norm ball was exhausted")]
    WordBudgetExceeded { limit: usize },

    #[error("{0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;
