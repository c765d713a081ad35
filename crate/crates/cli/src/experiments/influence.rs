//! Influence curves: how much one extra observation moves the posterior,
//! swept over where that observation lands.

use gvi_core::problem::{conjugate_posterior, influence};
use gvi_core::scoring::{LikelihoodModel, LossSpec, ScoreRule};
use gvi_core::ExpFamDistribution;

use crate::config::ExperimentConfig;
use crate::report::ResultRow;
use crate::CliError;

use super::{parallel_replicates, replicate_seeds};

pub fn run(config: &ExperimentConfig, jobs: usize) -> Result<Vec<ResultRow>, CliError> {
    let p = &config.parameters;
    let n = p.n.unwrap_or(50);
    let sigma2 = p.sigma2.unwrap_or(1.0);
    let prior_mean = p.prior_mean.unwrap_or(0.0);
    let prior_var = p.prior_var.unwrap_or(25.0);
    let gamma = p.gamma.unwrap_or(1.05);
    let grid_points = p.grid_points.unwrap_or(20);
    let grid_span = p.grid_span.unwrap_or(10.0);
    let replicates = p.replicates.unwrap_or(1);

    let name = config.experiment.name();
    let seeds = replicate_seeds(config.seed, replicates);
    let rows = parallel_replicates(name, &seeds, jobs, |_, seed| {
        let model = LikelihoodModel::GaussianMean { sigma2, dim: 1 };
        let generator = ExpFamDistribution::univariate_normal(0.0, sigma2)
            .map_err(|e| CliError::Runtime(e.to_string()))?;
        let data = generator.sample(n, seed);
        let prior = ExpFamDistribution::univariate_normal(prior_mean, prior_var)
            .map_err(|e| CliError::Runtime(e.to_string()))?;
        let center = conjugate_posterior(&model, &prior, &data)
            .map_err(|e| CliError::Runtime(e.to_string()))?
            .mean_params()[0];
        let neg_log = LossSpec::new(model.clone(), ScoreRule::NegLog)
            .map_err(|e| CliError::Runtime(e.to_string()))?;
        let gamma_loss = LossSpec::new(model.clone(), ScoreRule::GammaScore { gamma })
            .map_err(|e| CliError::Runtime(e.to_string()))?;
        let sigma = sigma2.sqrt();
        let mut rows = Vec::new();
        for i in 0..grid_points {
            // Offsets from the posterior mean, symmetric over ±span·σ.
            let offset =
                -grid_span + 2.0 * grid_span * i as f64 / (grid_points - 1) as f64;
            let x_new = center + offset * sigma;
            let v_log = influence(&prior, &data, &[x_new], &neg_log)
                .map_err(|e| CliError::Runtime(e.to_string()))?;
            let v_gamma = influence(&prior, &data, &[x_new], &gamma_loss)
                .map_err(|e| CliError::Runtime(e.to_string()))?;
            rows.push(ResultRow::new(
                name, seed, "offset_sd", offset, "influence_neglog", v_log,
            ));
            rows.push(ResultRow::new(
                name, seed, "offset_sd", offset, "influence_gamma", v_gamma,
            ));
        }
        Ok(rows)
    });
    Ok(rows)
}
