//! ε-contamination: a fraction of observations lands far from the generating
//! mean; the log score chases them, the γ-score shrugs them off.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use gvi_core::problem::{conjugate_posterior, quasi_conjugate_optimum};
use gvi_core::scoring::{LikelihoodModel, LossSpec, ScoreRule};
use gvi_core::ExpFamDistribution;

use crate::config::ExperimentConfig;
use crate::report::ResultRow;
use crate::CliError;

use super::{parallel_replicates, replicate_seeds};

pub fn run(config: &ExperimentConfig, jobs: usize) -> Result<Vec<ResultRow>, CliError> {
    let p = &config.parameters;
    let n = p.n.unwrap_or(100);
    let epsilon = p.epsilon.unwrap_or(0.1);
    let theta_star = p.theta_star.clone().map(|t| t[0]).unwrap_or(0.0);
    let sigma2 = p.sigma2.unwrap_or(1.0);
    let outlier_offset = p.outlier_offset.unwrap_or(10.0);
    let prior_var = p.prior_var.unwrap_or(25.0);
    let gamma_grid = p.gamma_grid.clone().unwrap_or_else(|| vec![1.01, 1.05]);
    let replicates = p.replicates.unwrap_or(20);

    let name = config.experiment.name();
    let seeds = replicate_seeds(config.seed, replicates);
    let rows = parallel_replicates(name, &seeds, jobs, |_, seed| {
        let sigma = sigma2.sqrt();
        let data = sample_contaminated(seed, n, theta_star, sigma, epsilon, outlier_offset);
        let model = LikelihoodModel::GaussianMean { sigma2, dim: 1 };
        let prior = ExpFamDistribution::univariate_normal(0.0, prior_var)
            .map_err(|e| CliError::Runtime(e.to_string()))?;

        let mut rows = Vec::new();
        let bayes = conjugate_posterior(&model, &prior, &data)
            .map_err(|e| CliError::Runtime(e.to_string()))?;
        rows.push(ResultRow::new(
            name,
            seed,
            "score",
            "neglog",
            "abs_error",
            (bayes.mean_params()[0] - theta_star).abs(),
        ));
        for &gamma in &gamma_grid {
            let loss = LossSpec::new(model.clone(), ScoreRule::GammaScore { gamma })
                .map_err(|e| CliError::Runtime(e.to_string()))?;
            let fitted = quasi_conjugate_optimum(&prior, &data, &loss)
                .map_err(|e| CliError::Runtime(e.to_string()))?;
            rows.push(ResultRow::new(
                name,
                seed,
                "score",
                format!("gamma_{gamma}"),
                "abs_error",
                (fitted.mean_params()[0] - theta_star).abs(),
            ));
        }
        Ok(rows)
    });
    Ok(rows)
}

fn sample_contaminated(
    seed: u64,
    n: usize,
    theta_star: f64,
    sigma: f64,
    epsilon: f64,
    outlier_offset: f64,
) -> Vec<Vec<f64>> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let outlier = rng.random::<f64>() < epsilon;
            let u1: f64 = rng.random::<f64>().max(1e-12);
            let u2: f64 = rng.random();
            let z = (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos();
            let center = if outlier {
                theta_star + outlier_offset * sigma
            } else {
                theta_star
            };
            vec![center + sigma * z]
        })
        .collect()
}
