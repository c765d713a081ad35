//! Declarative experiment configs: TOML as the native format, JSON accepted,
//! both behind an explicit schema version.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

/// The experiments the runner knows how to reproduce.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    BlrMarginals,
    PriorSweep,
    Consistency,
    Mixture,
    Influence,
    Contamination,
    BoundsCheck,
    DivergenceMagnitude,
}

impl ExperimentKind {
    pub fn all() -> &'static [ExperimentKind] {
        &[
            ExperimentKind::BlrMarginals,
            ExperimentKind::PriorSweep,
            ExperimentKind::Consistency,
            ExperimentKind::Mixture,
            ExperimentKind::Influence,
            ExperimentKind::Contamination,
            ExperimentKind::BoundsCheck,
            ExperimentKind::DivergenceMagnitude,
        ]
    }

    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::BlrMarginals => "blr-marginals",
            ExperimentKind::PriorSweep => "prior-sweep",
            ExperimentKind::Consistency => "consistency",
            ExperimentKind::Mixture => "mixture",
            ExperimentKind::Influence => "influence",
            ExperimentKind::Contamination => "contamination",
            ExperimentKind::BoundsCheck => "bounds-check",
            ExperimentKind::DivergenceMagnitude => "divergence-magnitude",
        }
    }

    pub fn description(&self) -> &'static str {
        match self {
            ExperimentKind::BlrMarginals => {
                "marginal posterior spread of correlated-predictor regression across divergences"
            }
            ExperimentKind::PriorSweep => {
                "posterior-mean sensitivity to shifted prior means, KLD vs Rényi-α"
            }
            ExperimentKind::Consistency => "posterior collapse as the sample size grows",
            ExperimentKind::Mixture => {
                "label-switching mixture: variational means land on a loss minimizer"
            }
            ExperimentKind::Influence => {
                "influence of one new observation under the log score and the γ-score"
            }
            ExperimentKind::Contamination => {
                "ε-contaminated data: robust-score vs log-score posterior error"
            }
            ExperimentKind::BoundsCheck => {
                "evidence-bound slack over random configurations per divergence"
            }
            ExperimentKind::DivergenceMagnitude => {
                "divergence magnitudes over hyperparameter grids on a fixed NIG pair"
            }
        }
    }
}

/// Experiment-specific parameters; unused fields are ignored by each
/// experiment and defaults are experiment-specific.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Parameters {
    pub n: Option<usize>,
    pub replicates: Option<usize>,
    pub sigma2: Option<f64>,
    pub rho: Option<f64>,
    pub theta_star: Option<Vec<f64>>,
    pub prior_mean: Option<f64>,
    pub prior_var: Option<f64>,
    pub prior_scale: Option<f64>,
    pub prior_a: Option<f64>,
    pub prior_b: Option<f64>,
    pub prior_mean_grid: Option<Vec<f64>>,
    pub alpha: Option<f64>,
    pub alpha_grid: Option<Vec<f64>>,
    pub gamma: Option<f64>,
    pub gamma_grid: Option<Vec<f64>>,
    pub hyper_grid: Option<Vec<f64>>,
    pub n_grid: Option<Vec<usize>>,
    pub mu_settings: Option<Vec<Vec<f64>>>,
    pub mixture_sigma: Option<f64>,
    pub epsilon: Option<f64>,
    pub outlier_offset: Option<f64>,
    pub grid_points: Option<usize>,
    pub grid_span: Option<f64>,
    pub configs: Option<usize>,
    pub optimizer_iters: Option<usize>,
    pub optimizer_samples: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub experiment: ExperimentKind,
    pub seed: u64,
    /// Output directory; the CLI's `--out` flag overrides it.
    pub output: Option<String>,
    #[serde(default)]
    pub parameters: Parameters,
}

impl ExperimentConfig {
    /// Full schema check without running. Returns every violation found.
    pub fn validate(&self) -> Vec<String> {
        let mut errors = Vec::new();
        if self.schema_version != SCHEMA_VERSION {
            errors.push(format!(
                "schema_version: expected {SCHEMA_VERSION}, got {}",
                self.schema_version
            ));
        }
        let p = &self.parameters;
        let mut require_nonempty_grid = |name: &str, grid: &Option<Vec<f64>>| {
            if let Some(g) = grid {
                if g.is_empty() {
                    errors.push(format!("parameters.{name}: grid must be nonempty"));
                }
                if g.iter().any(|v| !v.is_finite()) {
                    errors.push(format!("parameters.{name}: grid values must be finite"));
                }
            }
        };
        require_nonempty_grid("alpha_grid", &p.alpha_grid);
        require_nonempty_grid("gamma_grid", &p.gamma_grid);
        require_nonempty_grid("hyper_grid", &p.hyper_grid);
        require_nonempty_grid("prior_mean_grid", &p.prior_mean_grid);
        if let Some(g) = &p.n_grid {
            if g.is_empty() {
                errors.push("parameters.n_grid: grid must be nonempty".into());
            }
            if g.contains(&0) {
                errors.push("parameters.n_grid: sample sizes must be positive".into());
            }
        }
        if p.n == Some(0) {
            errors.push("parameters.n: must be positive".into());
        }
        if p.replicates == Some(0) {
            errors.push("parameters.replicates: must be positive".into());
        }
        for (name, value) in [
            ("sigma2", p.sigma2),
            ("prior_var", p.prior_var),
            ("prior_scale", p.prior_scale),
            ("prior_a", p.prior_a),
            ("prior_b", p.prior_b),
            ("mixture_sigma", p.mixture_sigma),
        ] {
            if let Some(v) = value {
                if !(v > 0.0 && v.is_finite()) {
                    errors.push(format!("parameters.{name}: must be strictly positive"));
                }
            }
        }
        if let Some(rho) = p.rho {
            if !(-1.0..=1.0).contains(&rho) {
                errors.push("parameters.rho: correlation must lie in [-1, 1]".into());
            }
        }
        if let Some(eps) = p.epsilon {
            if !(0.0..1.0).contains(&eps) {
                errors.push("parameters.epsilon: contamination rate must lie in [0, 1)".into());
            }
        }
        for (name, grid) in [
            ("alpha", p.alpha),
            ("gamma", p.gamma),
        ] {
            if let Some(h) = grid {
                if h == 1.0 || h == 0.0 || !h.is_finite() {
                    errors.push(format!(
                        "parameters.{name}: hyperparameter must be finite and outside {{0, 1}}"
                    ));
                }
            }
        }
        if matches!(self.experiment, ExperimentKind::Mixture) {
            if let Some(settings) = &p.mu_settings {
                if settings.iter().any(|s| s.len() != 2) {
                    errors.push("parameters.mu_settings: each setting needs two means".into());
                }
            }
        }
        errors
    }
}

/// Parse a config file; `.json` parses as JSON, everything else as TOML.
/// Parse failures carry the parser's line/column diagnostics.
pub fn load(path: &Path) -> Result<ExperimentConfig, CliError> {
    let raw = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let config: ExperimentConfig = if path.extension().and_then(|s| s.to_str()) == Some("json")
    {
        serde_json::from_str(&raw)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?
    } else {
        toml::from_str(&raw)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?
    };
    Ok(config)
}
