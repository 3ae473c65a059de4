//! flatdrift: a laboratory for flat-surface dynamics at desk scale.
//!
//! Triangulated translation surfaces with period coordinates, the GL2+(R)
//! action with Delaunay renormalization, exact McMullen prototype arithmetic
//! over quadratic orders, AGY-norm geometry, and instrumented Margulis
//! function experiments, all behind a deterministic seeded harness.

pub mod closing;
pub mod config;
pub mod delaunay;
pub mod error;
pub mod flow;
pub mod geom;
pub mod homology;
pub mod intlinalg;
pub mod lattice;
pub mod margulis;
pub mod norms;
pub mod parallel;
pub mod prototypes;
pub mod quad;
pub mod saddle;
pub mod surface;

pub use config::{ConstantsRegistry, ExperimentConfig};
pub use error::{Error, Result};
pub use geom::Mat2;
pub use surface::{build_surface, PeriodVector, TranslationSurface};
