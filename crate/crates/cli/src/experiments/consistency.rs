//! Posterior collapse: as the sample size grows, the fitted posterior's
//! spread shrinks and its mean closes in on the generating value,
//! irrespective of the divergence choice.

use gvi_core::divergence::DivergenceSpec;
use gvi_core::scoring::{LikelihoodModel, LossSpec, ScoreRule};
use gvi_core::{ExpFamDistribution, FamilyKind, GviProblem};

use crate::config::ExperimentConfig;
use crate::report::ResultRow;
use crate::CliError;

use super::{parallel_replicates, replicate_seeds, solve_closed};

pub fn run(config: &ExperimentConfig, jobs: usize) -> Result<Vec<ResultRow>, CliError> {
    let p = &config.parameters;
    let n_grid = p.n_grid.clone().unwrap_or_else(|| vec![50, 500, 5000]);
    let theta_star = p
        .theta_star
        .clone()
        .map(|t| t[0])
        .unwrap_or(2.0);
    let sigma2 = p.sigma2.unwrap_or(1.0);
    let prior_mean = p.prior_mean.unwrap_or(0.0);
    let prior_var = p.prior_var.unwrap_or(10.0);
    let alpha = p.alpha.unwrap_or(0.5);
    let replicates = p.replicates.unwrap_or(10);

    let name = config.experiment.name();
    let seeds = replicate_seeds(config.seed, replicates);
    let max_n = *n_grid.iter().max().expect("validated nonempty grid");
    let rows = parallel_replicates(name, &seeds, jobs, |_, seed| {
        let generator = ExpFamDistribution::univariate_normal(theta_star, sigma2)
            .map_err(|e| CliError::Runtime(e.to_string()))?;
        let pool = generator.sample(max_n, seed);
        let prior = ExpFamDistribution::univariate_normal(prior_mean, prior_var)
            .map_err(|e| CliError::Runtime(e.to_string()))?;
        let mut rows = Vec::new();
        for &n in &n_grid {
            let data: Vec<Vec<f64>> = pool[..n].to_vec();
            for (divergence, tag) in [
                (DivergenceSpec::Kld, "kld"),
                (DivergenceSpec::AlphaRenyi { alpha }, "rad"),
            ] {
                let problem = GviProblem::new(
                    LossSpec::new(
                        LikelihoodModel::GaussianMean { sigma2, dim: 1 },
                        ScoreRule::NegLog,
                    )
                    .map_err(|e| CliError::Runtime(e.to_string()))?,
                    divergence,
                    prior.clone(),
                    FamilyKind::UnivariateNormal,
                    data.clone(),
                    None,
                )
                .map_err(|e| CliError::Runtime(e.to_string()))?;
                let kappa = solve_closed(&problem, prior.mean_params())?;
                rows.push(ResultRow::new(
                    name,
                    seed,
                    "n",
                    n,
                    &format!("posterior_sd_{tag}"),
                    kappa[1].sqrt(),
                ));
                rows.push(ResultRow::new(
                    name,
                    seed,
                    "n",
                    n,
                    &format!("abs_mean_error_{tag}"),
                    (kappa[0] - theta_star).abs(),
                ));
            }
        }
        Ok(rows)
    });
    Ok(rows)
}
