//! The experiment catalogue: each submodule turns a validated config into
//! long-format result rows, deterministically per seed.

mod blr;
mod bounds;
mod consistency;
mod contamination;
mod influence;
mod magnitude;
mod mixture;
mod prior_sweep;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use gvi_core::problem::EvalStrategy;
use gvi_core::{bbgvi, GviProblem};

use crate::config::{ExperimentConfig, ExperimentKind};
use crate::report::ResultRow;
use crate::CliError;

pub fn run(config: &ExperimentConfig, jobs: usize) -> Result<Vec<ResultRow>, CliError> {
    let errors = config.validate();
    if !errors.is_empty() {
        return Err(CliError::Config(errors.join("; ")));
    }
    match config.experiment {
        ExperimentKind::BlrMarginals => blr::run(config, jobs),
        ExperimentKind::PriorSweep => prior_sweep::run(config, jobs),
        ExperimentKind::Consistency => consistency::run(config, jobs),
        ExperimentKind::Mixture => mixture::run(config, jobs),
        ExperimentKind::Influence => influence::run(config, jobs),
        ExperimentKind::Contamination => contamination::run(config, jobs),
        ExperimentKind::BoundsCheck => bounds::run(config, jobs),
        ExperimentKind::DivergenceMagnitude => magnitude::run(config, jobs),
    }
}

/// Replicate seeds: distinct per replicate, derived from the base seed.
pub(crate) fn replicate_seeds(base: u64, replicates: usize) -> Vec<u64> {
    (0..replicates as u64).map(|r| base.wrapping_add(r)).collect()
}

/// Run one closure per item on up to `jobs` threads, preserving item order.
/// A failed item is converted into a single `failed = 1` row so a sweep
/// never aborts wholesale.
pub(crate) fn parallel_replicates<F>(
    experiment: &str,
    seeds: &[u64],
    jobs: usize,
    f: F,
) -> Vec<ResultRow>
where
    F: Fn(usize, u64) -> Result<Vec<ResultRow>, CliError> + Sync,
{
    let jobs = jobs.max(1).min(seeds.len().max(1));
    let mut results: Vec<Option<Result<Vec<ResultRow>, CliError>>> =
        (0..seeds.len()).map(|_| None).collect();
    if jobs <= 1 {
        for (i, &seed) in seeds.iter().enumerate() {
            results[i] = Some(f(i, seed));
        }
    } else {
        let next = std::sync::atomic::AtomicUsize::new(0);
        let slots: Vec<std::sync::Mutex<Option<Result<Vec<ResultRow>, CliError>>>> =
            (0..seeds.len()).map(|_| std::sync::Mutex::new(None)).collect();
        std::thread::scope(|scope| {
            for _ in 0..jobs {
                scope.spawn(|| loop {
                    let i = next.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
                    if i >= seeds.len() {
                        break;
                    }
                    let outcome = f(i, seeds[i]);
                    *slots[i].lock().expect("result slot") = Some(outcome);
                });
            }
        });
        for (slot, result) in slots.into_iter().zip(results.iter_mut()) {
            *result = slot.into_inner().expect("result slot");
        }
    }
    let mut rows = Vec::new();
    for (i, outcome) in results.into_iter().enumerate() {
        match outcome.expect("every replicate ran") {
            Ok(mut r) => rows.append(&mut r),
            Err(_) => rows.push(ResultRow::new(
                experiment,
                seeds[i],
                "replicate",
                i,
                "failed",
                1.0,
            )),
        }
    }
    rows
}

/// Deterministic minimizer of a problem's closed-form objective.
pub(crate) fn solve_closed(problem: &GviProblem, kappa0: &[f64]) -> Result<Vec<f64>, CliError> {
    bbgvi::optimize_closed_form(
        |k| problem.objective(k, EvalStrategy::ClosedForm),
        kappa0,
        problem.family(),
    )
    .map_err(|e| CliError::Runtime(e.to_string()))
}

/// Correlated-predictor regression draws: X rows from N₂(0, [[1, ρ], [ρ, 1]]),
/// responses y = Xθ* + σ·ε.
pub(crate) fn blr_data(
    seed: u64,
    n: usize,
    rho: f64,
    theta_star: &[f64; 2],
    sigma2: f64,
) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut standard_normal = move || -> f64 {
        // Box–Muller on the shared stream.
        let u1: f64 = rng.random::<f64>().max(1e-12);
        let u2: f64 = rng.random();
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    };
    let cross = (1.0 - rho * rho).sqrt();
    let mut design = Vec::with_capacity(n);
    let mut data = Vec::with_capacity(n);
    for _ in 0..n {
        let z1 = standard_normal();
        let z2 = standard_normal();
        let x1 = z1;
        let x2 = rho * z1 + cross * z2;
        let y = theta_star[0] * x1 + theta_star[1] * x2 + sigma2.sqrt() * standard_normal();
        design.push(vec![x1, x2]);
        data.push(vec![y]);
    }
    (data, design)
}
