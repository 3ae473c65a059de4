//! Constants registry and experiment configuration.
//!
//! The non-effective exponents (kappa3..kappa19, the C constants, the Forni
//! surrogate) never get explicit values in the source material, so they live
//! here with documented defaults. Every experiment record embeds the snapshot
//! it ran with, so fitted empirical values can be reported next to the
//! configured ones.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ConstantsRegistry {
    /// Horocycle nondivergence exponent (defaults to 0.5).
    pub kappa3: f64,
    /// Threshold-time coefficient of the nondivergence bound.
    pub kappa4: f64,
    /// Injectivity exponent of the covering map restriction.
    pub kappa5: f64,
    /// Injectivity-scale exponent: L(z) = systole(z)^kappa6.
    pub kappa6: f64,
    /// Spectral coefficient of the mixing estimate.
    pub kappa7: f64,
    pub kappa8: f64,
    pub kappa9: f64,
    pub kappa10: f64,
    pub kappa11: f64,
    pub kappa12: f64,
    pub kappa13: f64,
    pub kappa14: f64,
    pub kappa15: f64,
    pub kappa16: f64,
    pub kappa17: f64,
    pub kappa18: f64,
    pub kappa19: f64,
    /// Orientation-stability constant of the inscribed-triangle lemma.
    pub c4: f64,
    /// Additive constant in the nondivergence threshold time.
    pub c6: f64,
    /// Second Lyapunov exponent surrogate (the Forni bound stand-in) plus its
    /// margin, applied outside the compact-part threshold.
    pub lambda_plus: f64,
    pub lambda_plus_margin: f64,
    pub compact_part_threshold: f64,
    /// Drift constant of the worst-case profile claim.
    pub varpi: f64,
    /// Geometry tolerance for single operations (gluing, closure, flips).
    pub tol_geometry: f64,
    /// Tolerance for canonical-form and flow round-trip comparisons.
    pub tol_flow: f64,
    /// Default flip cap; exceeding it signals the time step was too large
    /// for float geometry.
    pub flip_cap: usize,
    /// Saddle-connection candidate budget.
    pub saddle_budget: usize,
    /// a_t convention switch: 1.0 keeps diag(e^{t/2}, e^{-t/2}), 2.0 gives
    /// the e^t scaling some displayed computations use.
    pub time_scale: f64,
}

impl Default for ConstantsRegistry {
    fn default() -> Self {
        ConstantsRegistry {
            kappa3: 0.5,
            kappa4: 1.0,
            kappa5: 1.0,
            kappa6: 3.0,
            kappa7: 1.0,
            kappa8: 1.0,
            kappa9: 1.0,
            kappa10: 1.0,
            kappa11: 1.0,
            kappa12: 1.0,
            kappa13: 1.0,
            kappa14: 1.0,
            kappa15: 1.0,
            kappa16: 1.0,
            kappa17: 1.0,
            kappa18: 1.0,
            kappa19: 1.0,
            c4: 0.1,
            c6: 1.0,
            lambda_plus: 1.0 / 3.0,
            lambda_plus_margin: 0.1,
            compact_part_threshold: 0.1,
            varpi: 1.0,
            tol_geometry: 1e-9,
            tol_flow: 1e-6,
            flip_cap: 1_000_000,
            saddle_budget: 2_000_000,
            time_scale: 1.0,
        }
    }
}

impl ConstantsRegistry {
    /// Load from a TOML or JSON file, decided by extension.
    pub fn from_file(path: &std::path::Path) -> std::io::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let parsed = if path.extension().map(|e| e == "json").unwrap_or(false) {
            serde_json::from_str(&text).map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))?
        } else {
            toml::from_str(&text).map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))?
        };
        Ok(parsed)
    }

    /// One-line snapshot embedded into every emitted record.
    pub fn snapshot(&self) -> String {
        serde_json::to_string(self).expect("registry serializes")
    }

    /// Effective Forni surrogate outside the compact part: constant value
    /// lambda_plus + margin, logged by callers rather than silently assumed.
    pub fn lambda_surrogate(&self, systole: f64) -> f64 {
        if systole < self.compact_part_threshold {
            (self.lambda_plus + self.lambda_plus_margin).min(0.999)
        } else {
            self.lambda_plus
        }
    }
}

/// Common experiment configuration: registry + seed + worker count.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub registry: ConstantsRegistry,
    pub seed: u64,
    pub workers: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig { registry: ConstantsRegistry::default(), seed: 0, workers: 0 }
    }
}
