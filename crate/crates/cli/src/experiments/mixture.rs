//! Label-switching mixture: the exact posterior is bimodal by symmetry; a
//! unimodal variational fit should center on one of the two loss minimizers
//! rather than on the worst point between them.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use gvi_core::divergence::DivergenceSpec;
use gvi_core::scoring::{LikelihoodModel, LossSpec, ScoreRule};
use gvi_core::{bbgvi, oracle, ExpFamDistribution, FamilyKind, GviProblem};

use crate::config::ExperimentConfig;
use crate::report::ResultRow;
use crate::CliError;

use super::{parallel_replicates, replicate_seeds};

pub fn run(config: &ExperimentConfig, jobs: usize) -> Result<Vec<ResultRow>, CliError> {
    let p = &config.parameters;
    let n = p.n.unwrap_or(100);
    let settings = p
        .mu_settings
        .clone()
        .unwrap_or_else(|| vec![vec![0.0, 0.75], vec![0.0, 2.0]]);
    let sigma = p.mixture_sigma.unwrap_or(0.65);
    let prior_var = p.prior_var.unwrap_or(4.0);
    let alpha = p.alpha.unwrap_or(0.5);
    let replicates = p.replicates.unwrap_or(1);
    let iters = p.optimizer_iters.unwrap_or(6000);
    let samples = p.optimizer_samples.unwrap_or(16);

    let name = config.experiment.name();
    let seeds = replicate_seeds(config.seed, replicates);
    let rows = parallel_replicates(name, &seeds, jobs, |_, seed| {
        let mut rows = Vec::new();
        for (si, setting) in settings.iter().enumerate() {
            let truth = [setting[0], setting[1]];
            let data = sample_mixture(seed.wrapping_add(si as u64 * 7919), n, &truth, sigma);
            let loss = LossSpec::new(
                LikelihoodModel::GaussianMixture2 { sigma },
                ScoreRule::NegLog,
            )
            .map_err(|e| CliError::Runtime(e.to_string()))?;

            // Independent oracle: grid minimizer of the raw total loss.
            let loss_for_grid = loss.clone();
            let data_for_grid = data.clone();
            let span = truth[1].abs().max(truth[0].abs()) + 2.0;
            let minimizer = oracle::grid_argmin(
                move |mu| loss_for_grid.total_loss(mu, &data_for_grid),
                &[(-span, span), (-span, span)],
                121,
            );
            rows.push(ResultRow::new(
                name, seed, "setting", si, "loss_minimizer_mu1", minimizer[0],
            ));
            rows.push(ResultRow::new(
                name, seed, "setting", si, "loss_minimizer_mu2", minimizer[1],
            ));

            let prior = ExpFamDistribution::diagonal_normal(&[0.0, 0.0], &[prior_var, prior_var])
                .map_err(|e| CliError::Runtime(e.to_string()))?;
            for (divergence, tag) in [
                (DivergenceSpec::Kld, "vi"),
                (DivergenceSpec::AlphaRenyi { alpha }, "gvi"),
            ] {
                let problem = GviProblem::new(
                    loss.clone(),
                    divergence,
                    prior.clone(),
                    FamilyKind::DiagonalNormal { dim: 2 },
                    data.clone(),
                    None,
                )
                .map_err(|e| CliError::Runtime(e.to_string()))?;
                // Symmetry-breaking start: spread the two means across the
                // lower and upper quartiles of the data.
                let mut sorted: Vec<f64> = data.iter().map(|r| r[0]).collect();
                sorted.sort_by(f64::total_cmp);
                let kappa0 = [
                    sorted[n / 4],
                    sorted[3 * n / 4],
                    0.25,
                    0.25,
                ];
                let mut opt_config = bbgvi::OptimizerConfig::new(
                    bbgvi::EstimatorKind::ClosedD,
                    samples,
                    n,
                    seed.wrapping_mul(31).wrapping_add(si as u64),
                );
                opt_config.max_iters = iters;
                opt_config.adam.step_size = 0.02;
                let trace = bbgvi::optimize(&problem, &kappa0, opt_config)
                    .map_err(|e| CliError::Runtime(e.to_string()))?;
                let fitted = &trace.final_kappa;
                let swapped = [minimizer[1], minimizer[0]];
                let dist = |target: &[f64]| {
                    ((fitted[0] - target[0]).powi(2) + (fitted[1] - target[1]).powi(2)).sqrt()
                };
                let nearest = dist(&minimizer).min(dist(&swapped));
                rows.push(ResultRow::new(
                    name,
                    seed,
                    "setting",
                    si,
                    &format!("posterior_mean_mu1_{tag}"),
                    fitted[0],
                ));
                rows.push(ResultRow::new(
                    name,
                    seed,
                    "setting",
                    si,
                    &format!("posterior_mean_mu2_{tag}"),
                    fitted[1],
                ));
                rows.push(ResultRow::new(
                    name,
                    seed,
                    "setting",
                    si,
                    &format!("dist_to_minimizer_{tag}"),
                    nearest,
                ));
            }
        }
        Ok(rows)
    });
    Ok(rows)
}

fn sample_mixture(seed: u64, n: usize, truth: &[f64; 2], sigma: f64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let component = if rng.random::<f64>() < 0.5 { 0 } else { 1 };
            let u1: f64 = rng.random::<f64>().max(1e-12);
            let u2: f64 = rng.random();
            let z = (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos();
            vec![truth[component] + sigma * z]
        })
        .collect()
}
