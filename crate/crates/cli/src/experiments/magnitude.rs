//! Divergence magnitudes on a fixed, well-separated normal-inverse-gamma
//! pair, swept over each kind's hyperparameter grid: kinds with
//! hyperparameters below one penalize the move away from the prior more than
//! the KLD, above one less.

use gvi_core::divergence::{closed_form, DivergenceSpec};
use gvi_core::ExpFamDistribution;

use crate::config::ExperimentConfig;
use crate::report::ResultRow;
use crate::CliError;

pub fn run(config: &ExperimentConfig, _jobs: usize) -> Result<Vec<ResultRow>, CliError> {
    let p = &config.parameters;
    let grid = p
        .hyper_grid
        .clone()
        .unwrap_or_else(|| vec![0.25, 0.5, 0.75, 0.9, 1.1, 1.5, 2.0, 3.0]);

    let name = config.experiment.name();
    let seed = config.seed;
    let q = ExpFamDistribution::normal_inverse_gamma(&[2.5, 2.5], &[0.3, 0.3], 512.0, 543.0)
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    let prior = ExpFamDistribution::normal_inverse_gamma(&[0.0, 0.0], &[25.0, 25.0], 500.0, 500.0)
        .map_err(|e| CliError::Runtime(e.to_string()))?;

    let mut rows = Vec::new();
    let kld = closed_form(&q, &prior, &DivergenceSpec::Kld)
        .map_err(|e| CliError::Runtime(e.to_string()))?
        .value;
    rows.push(ResultRow::new(name, seed, "kind", "kld", "divergence", kld));

    let kinds: Vec<(&str, fn(f64) -> DivergenceSpec)> = vec![
        ("alpha", |h| DivergenceSpec::Alpha { alpha: h }),
        ("alpha-renyi", |h| DivergenceSpec::AlphaRenyi { alpha: h }),
        ("beta", |h| DivergenceSpec::Beta { beta: h }),
        ("gamma", |h| DivergenceSpec::Gamma { gamma: h }),
        ("weighted-kld", |h| DivergenceSpec::WeightedKld { weight: h }),
    ];
    for (kind_name, make) in kinds {
        for &h in &grid {
            if h == 1.0 {
                continue;
            }
            match closed_form(&q, &prior, &make(h)) {
                Ok(v) => rows.push(ResultRow::new(
                    name,
                    seed,
                    "kind",
                    format!("{kind_name}_{h}"),
                    "divergence",
                    v.value,
                )),
                // Infeasible combinations are data, not failures.
                Err(_) => rows.push(ResultRow::new(
                    name,
                    seed,
                    "kind",
                    format!("{kind_name}_{h}"),
                    "failed",
                    1.0,
                )),
            }
        }
    }
    Ok(rows)
}
