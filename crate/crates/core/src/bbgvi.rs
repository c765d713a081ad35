//! Black-box stochastic optimizer for variational objectives: score-function
//! gradient estimators with minibatching, an optional control variate, and
//! ADAM updates.
//!
//! Three estimator kinds cover the divergence landscape:
//!
//! - `ClosedD`: score-function loss gradient plus the exact divergence
//!   gradient. Unbiased; lowest variance when the closed form is feasible.
//! - `ExpectationD`: for divergences expressible as E_q[ℓ^D(θ)], the
//!   integrand rides along with the loss inside the score-function estimator
//!   plus its direct κ-derivative. Unbiased.
//! - `BiasedTau`: for divergences of the form τ(E_q[ℓ^D(θ)]) (Rényi-α, γ),
//!   the chain rule evaluated at the sampled inner means. Consistent but
//!   biased at finite sample counts; with τ = id it reduces to
//!   `ExpectationD`.
//!
//! Positive parameters (variances, shapes, rates) are optimized through a
//! log-reparameterization so every iterate satisfies the family invariants.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::divergence::{self, DivergenceSpec};
use crate::error::{GviError, Result};
use crate::expfam::{ExpFamDistribution, FamilyKind};
use crate::problem::GviProblem;
use crate::scoring::{LikelihoodModel, ScoreRule};

/// Which gradient estimator serves the divergence term.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimatorKind {
    ClosedD,
    ExpectationD,
    BiasedTau,
    /// Resolve per step: closed form when feasible, otherwise the
    /// expectation path for linear kinds and the τ path for transformed ones.
    Auto,
}

/// ADAM hyperparameters with an optional step-size schedule
/// step_size / (1 + step_decay·t).
#[derive(Debug, Clone, Copy)]
pub struct AdamParams {
    pub step_size: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// 0 keeps the step size constant.
    pub step_decay: f64,
}

impl Default for AdamParams {
    fn default() -> Self {
        Self {
            step_size: 0.01,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            step_decay: 0.0,
        }
    }
}

/// Stopping criterion: relative parameter change below `tol` sustained for
/// `patience` consecutive iterations.
#[derive(Debug, Clone, Copy)]
pub struct Stopping {
    pub tol: f64,
    pub patience: usize,
}

impl Default for Stopping {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            patience: 50,
        }
    }
}

#[derive(Debug, Clone)]
pub struct OptimizerConfig {
    pub estimator: EstimatorKind,
    /// Monte-Carlo draws from q per step.
    pub samples: usize,
    /// Minibatch size (clamped to n).
    pub minibatch: usize,
    pub max_iters: usize,
    pub adam: AdamParams,
    pub stopping: Stopping,
    pub control_variate: bool,
    /// Coordinate-wise Rao-Blackwellization; supported for per-dimension
    /// factorized losses over a mean-field normal family with `ClosedD`.
    pub rao_blackwellize: bool,
    pub seed: u64,
}

impl OptimizerConfig {
    pub fn new(estimator: EstimatorKind, samples: usize, minibatch: usize, seed: u64) -> Self {
        Self {
            estimator,
            samples,
            minibatch,
            max_iters: 5000,
            adam: AdamParams::default(),
            stopping: Stopping::default(),
            control_variate: true,
            rao_blackwellize: false,
            seed,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.samples == 0 || self.minibatch == 0 {
            return Err(GviError::InvalidParameter(
                "sample and minibatch sizes must be at least 1".into(),
            ));
        }
        if self.adam.step_size <= 0.0 {
            return Err(GviError::InvalidParameter(
                "ADAM step size must be positive".into(),
            ));
        }
        for b in [self.adam.beta1, self.adam.beta2] {
            if !(0.0..1.0).contains(&b) {
                return Err(GviError::InvalidParameter(format!(
                    "ADAM decay rates must lie in [0, 1), got {b}"
                )));
            }
        }
        Ok(())
    }
}

/// One stochastic gradient with its diagnostics, in mean-parameter space.
#[derive(Debug, Clone)]
pub struct GradientEstimate {
    /// The estimator that actually produced this sample (Auto resolved).
    pub estimator: EstimatorKind,
    pub gradient: Vec<f64>,
    /// Per-coordinate sample variance of the per-draw gradient terms.
    pub sample_variance: Vec<f64>,
    /// Fitted control-variate scales when the variate was applied.
    pub cv_scale: Option<Vec<f64>>,
    /// Monte-Carlo objective estimate from the same draws.
    pub objective: f64,
}

#[derive(Debug, Clone)]
pub struct TraceRecord {
    pub iter: usize,
    pub kappa: Vec<f64>,
    pub objective: f64,
    pub grad_norm: f64,
    pub grad_variance: Vec<f64>,
    pub cv_scale: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Termination {
    Converged { at: usize },
    MaxIters,
}

#[derive(Debug, Clone)]
pub struct OptimizationTrace {
    pub records: Vec<TraceRecord>,
    pub final_kappa: Vec<f64>,
    pub termination: Termination,
}

/// Stateful optimizer over a problem; see [`optimize`] for the one-shot form.
pub struct Optimizer<'a> {
    problem: &'a GviProblem,
    config: OptimizerConfig,
    positive: Vec<bool>,
    u: Vec<f64>,
    adam_m: Vec<f64>,
    adam_v: Vec<f64>,
    t: usize,
    rng: ChaCha12Rng,
}

impl<'a> Optimizer<'a> {
    pub fn new(problem: &'a GviProblem, kappa0: &[f64], config: OptimizerConfig) -> Result<Self> {
        config.validate()?;
        problem.variational(kappa0)?;
        check_estimator(problem, config.estimator)?;
        if config.rao_blackwellize {
            check_rao_blackwell(problem)?;
        }
        let positive = problem.family().positive_mask();
        let u = to_unconstrained(kappa0, &positive);
        let len = u.len();
        let rng = ChaCha12Rng::seed_from_u64(config.seed);
        Ok(Self {
            problem,
            config,
            positive,
            u,
            adam_m: vec![0.0; len],
            adam_v: vec![0.0; len],
            t: 0,
            rng,
        })
    }

    pub fn kappa(&self) -> Vec<f64> {
        to_constrained(&self.u, &self.positive)
    }

    /// Draw a stochastic gradient at the current iterate and apply one ADAM
    /// update. Returns the estimate and the new κ.
    pub fn gradient_step(&mut self) -> Result<(GradientEstimate, Vec<f64>)> {
        let kappa = self.kappa();
        let estimate = estimate_gradient(self.problem, &kappa, &self.config, &mut self.rng)?;
        if estimate.gradient.iter().any(|g| !g.is_finite()) {
            return Err(GviError::NonFinite {
                iteration: self.t,
                what: "gradient".into(),
            });
        }
        self.t += 1;
        let correction1 = 1.0 - self.config.adam.beta1.powi(self.t as i32);
        let correction2 = 1.0 - self.config.adam.beta2.powi(self.t as i32);
        let step =
            self.config.adam.step_size / (1.0 + self.config.adam.step_decay * self.t as f64);
        for i in 0..self.u.len() {
            // Chain rule into the unconstrained space: dκ/du = κ for
            // log-reparameterized coordinates.
            let g = if self.positive[i] {
                estimate.gradient[i] * kappa[i]
            } else {
                estimate.gradient[i]
            };
            let m = &mut self.adam_m[i];
            let v = &mut self.adam_v[i];
            *m = self.config.adam.beta1 * *m + (1.0 - self.config.adam.beta1) * g;
            *v = self.config.adam.beta2 * *v + (1.0 - self.config.adam.beta2) * g * g;
            let m_hat = *m / correction1;
            let v_hat = *v / correction2;
            self.u[i] -= step * m_hat / (v_hat.sqrt() + self.config.adam.epsilon);
        }
        if self.u.iter().any(|v| !v.is_finite()) {
            return Err(GviError::NonFinite {
                iteration: self.t,
                what: "parameters".into(),
            });
        }
        Ok((estimate, self.kappa()))
    }

    /// Run to the stopping criterion or the iteration cap.
    pub fn run(mut self) -> Result<OptimizationTrace> {
        let mut records = Vec::new();
        let mut quiet_iters = 0usize;
        let mut termination = Termination::MaxIters;
        for iter in 0..self.config.max_iters {
            let before = self.kappa();
            let (estimate, after) = self.gradient_step()?;
            if !estimate.objective.is_finite() {
                return Err(GviError::NonFinite {
                    iteration: iter,
                    what: "objective".into(),
                });
            }
            let grad_norm = estimate
                .gradient
                .iter()
                .map(|g| g * g)
                .sum::<f64>()
                .sqrt();
            records.push(TraceRecord {
                iter,
                kappa: after.clone(),
                objective: estimate.objective,
                grad_norm,
                grad_variance: estimate.sample_variance.clone(),
                cv_scale: estimate.cv_scale.clone(),
            });
            let rel_change = before
                .iter()
                .zip(&after)
                .map(|(b, a)| (a - b).abs() / b.abs().max(1.0))
                .fold(0.0, f64::max);
            if rel_change < self.config.stopping.tol {
                quiet_iters += 1;
                if quiet_iters >= self.config.stopping.patience {
                    termination = Termination::Converged { at: iter };
                    break;
                }
            } else {
                quiet_iters = 0;
            }
        }
        Ok(OptimizationTrace {
            final_kappa: self.kappa(),
            records,
            termination,
        })
    }
}

/// Minimize the problem's objective from κ₀ under `config`.
pub fn optimize(
    problem: &GviProblem,
    kappa0: &[f64],
    config: OptimizerConfig,
) -> Result<OptimizationTrace> {
    Optimizer::new(problem, kappa0, config)?.run()
}

/// One stochastic gradient at κ without touching any optimizer state;
/// deterministic in `seed`. Diagnostics and unbiasedness checks use this.
pub fn sample_gradient(
    problem: &GviProblem,
    kappa: &[f64],
    config: &OptimizerConfig,
    seed: u64,
) -> Result<GradientEstimate> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    estimate_gradient(problem, kappa, config, &mut rng)
}

fn check_estimator(problem: &GviProblem, estimator: EstimatorKind) -> Result<()> {
    let transformed = matches!(
        problem.divergence(),
        DivergenceSpec::AlphaRenyi { .. } | DivergenceSpec::Gamma { .. }
    );
    if estimator == EstimatorKind::ExpectationD && transformed {
        return Err(GviError::EstimatorMismatch(
            "the Rényi-α and γ divergences are not expectation-linear; \
             use BiasedTau or ClosedD"
                .into(),
        ));
    }
    Ok(())
}

fn check_rao_blackwell(problem: &GviProblem) -> Result<()> {
    let factorized_loss = matches!(
        (&problem.loss().model, &problem.loss().score),
        (
            LikelihoodModel::GaussianMean { .. },
            ScoreRule::NegLog | ScoreRule::Absolute
        )
    );
    let mean_field = matches!(
        problem.family(),
        FamilyKind::DiagonalNormal { .. } | FamilyKind::UnivariateNormal
    );
    if factorized_loss && mean_field {
        Ok(())
    } else {
        Err(GviError::EstimatorMismatch(
            "Rao-Blackwellization needs a per-dimension factorized loss over \
             a mean-field normal family"
                .into(),
        ))
    }
}

fn to_unconstrained(kappa: &[f64], positive: &[bool]) -> Vec<f64> {
    kappa
        .iter()
        .zip(positive)
        .map(|(k, &pos)| if pos { k.ln() } else { *k })
        .collect()
}

fn to_constrained(u: &[f64], positive: &[bool]) -> Vec<f64> {
    u.iter()
        .zip(positive)
        .map(|(v, &pos)| if pos { v.exp() } else { *v })
        .collect()
}

/// Per-dimension loss pieces for Rao-Blackwellized coordinates.
fn per_dimension_loss(model: &LikelihoodModel, score: &ScoreRule, theta: &[f64], x: &[f64], j: usize) -> f64 {
    match (model, score) {
        (LikelihoodModel::GaussianMean { sigma2, .. }, ScoreRule::NegLog) => {
            (x[j] - theta[j]).powi(2) / (2.0 * sigma2)
        }
        (LikelihoodModel::GaussianMean { .. }, ScoreRule::Absolute) => (theta[j] - x[j]).abs(),
        _ => unreachable!("guarded by check_rao_blackwell"),
    }
}

fn estimate_gradient(
    problem: &GviProblem,
    kappa: &[f64],
    config: &OptimizerConfig,
    rng: &mut ChaCha12Rng,
) -> Result<GradientEstimate> {
    let q = problem.variational(kappa)?;
    let n = problem.n();
    let k = config.minibatch.min(n);
    let scale = n as f64 / k as f64;
    let dim = kappa.len();
    let s = config.samples;

    // Step 1: minibatch without replacement.
    let batch: Vec<usize> = rand::seq::index::sample(rng, n, k).into_vec();

    // Step 2: draws from q and per-draw loss terms.
    let draws: Vec<Vec<f64>> = (0..s).map(|_| q.sample_one(rng)).collect();
    let rows = problem.loss_rows();
    let losses: Vec<f64> = draws
        .iter()
        .map(|theta| {
            scale
                * batch
                    .iter()
                    .map(|&i| problem.loss().loss(theta, &rows[i]))
                    .sum::<f64>()
        })
        .collect();
    let scores: Vec<Vec<f64>> = draws
        .iter()
        .map(|theta| q.mean_param_score(theta))
        .collect::<Result<_>>()?;

    // Step 3: assemble per-draw gradient terms; the divergence enters either
    // per draw (score-function paths) or once as a closed-form vector.
    let (resolved, per_draw_div, closed_div_grad, div_value) =
        divergence_terms(problem, kappa, &q, &draws, &scores, config.estimator)?;

    let mut terms = vec![vec![0.0; dim]; s];
    if config.rao_blackwellize {
        let theta_dim = problem.family().support_dim();
        for (si, theta) in draws.iter().enumerate() {
            for j in 0..theta_dim {
                let loss_j: f64 = scale
                    * batch
                        .iter()
                        .map(|&i| {
                            per_dimension_loss(
                                &problem.loss().model,
                                &problem.loss().score,
                                theta,
                                &rows[i],
                                j,
                            )
                        })
                        .sum::<f64>();
                // Mean-field layout: coordinate j drives (μ_j, v_j).
                terms[si][j] = loss_j * scores[si][j];
                terms[si][theta_dim + j] = loss_j * scores[si][theta_dim + j];
            }
        }
    } else {
        for si in 0..s {
            for d in 0..dim {
                terms[si][d] = losses[si] * scores[si][d];
            }
        }
    }
    if let Some(per_draw) = &per_draw_div {
        for (term, extra) in terms.iter_mut().zip(per_draw) {
            for (t, e) in term.iter_mut().zip(extra) {
                *t += e;
            }
        }
    }

    // Step 4: control variate h(θ) = ∇_κ log q(θ|κ) with per-coordinate
    // fitted scale â = cov(G, h)/var(h).
    let cv_scale = if config.control_variate && s >= 2 {
        let mut scales = vec![0.0; dim];
        for d in 0..dim {
            let mean_h: f64 = scores.iter().map(|h| h[d]).sum::<f64>() / s as f64;
            let mean_g: f64 = terms.iter().map(|t| t[d]).sum::<f64>() / s as f64;
            let mut cov = 0.0;
            let mut var = 0.0;
            for (t, h) in terms.iter().zip(&scores) {
                cov += (t[d] - mean_g) * (h[d] - mean_h);
                var += (h[d] - mean_h).powi(2);
            }
            scales[d] = if var > 0.0 { cov / var } else { 0.0 };
        }
        for (t, h) in terms.iter_mut().zip(&scores) {
            for d in 0..dim {
                t[d] -= scales[d] * h[d];
            }
        }
        Some(scales)
    } else {
        None
    };

    let mut gradient = vec![0.0; dim];
    let mut variance = vec![0.0; dim];
    for d in 0..dim {
        let mean: f64 = terms.iter().map(|t| t[d]).sum::<f64>() / s as f64;
        gradient[d] = mean;
        if s >= 2 {
            variance[d] =
                terms.iter().map(|t| (t[d] - mean).powi(2)).sum::<f64>() / (s as f64 - 1.0);
        }
    }
    if let Some(g_div) = &closed_div_grad {
        for (g, e) in gradient.iter_mut().zip(g_div) {
            *g += e;
        }
    }

    let objective = losses.iter().sum::<f64>() / s as f64 + div_value;
    Ok(GradientEstimate {
        estimator: resolved,
        gradient,
        sample_variance: variance,
        cv_scale,
        objective,
    })
}

/// Divergence contribution for one step: the resolved estimator kind,
/// optional per-draw gradient terms, optional closed-form gradient, and the
/// divergence value estimate for the trace.
#[allow(clippy::type_complexity)]
fn divergence_terms(
    problem: &GviProblem,
    kappa: &[f64],
    q: &ExpFamDistribution,
    draws: &[Vec<f64>],
    scores: &[Vec<f64>],
    requested: EstimatorKind,
) -> Result<(EstimatorKind, Option<Vec<Vec<f64>>>, Option<Vec<f64>>, f64)> {
    let spec = problem.divergence();
    let prior = problem.prior();
    let transformed = matches!(
        spec,
        DivergenceSpec::AlphaRenyi { .. } | DivergenceSpec::Gamma { .. }
    );

    let closed = divergence::divergence_gradient(problem.family(), kappa, prior, spec);
    let use_closed = match requested {
        EstimatorKind::ClosedD => {
            if closed.is_err() {
                return Err(GviError::EstimatorMismatch(format!(
                    "closed-form divergence gradient unavailable: {:?}",
                    closed.err()
                )));
            }
            true
        }
        EstimatorKind::Auto => closed.is_ok(),
        _ => false,
    };
    if use_closed {
        let value = divergence::closed_form(q, prior, spec)?.value;
        return Ok((EstimatorKind::ClosedD, None, Some(closed?), value));
    }

    let s = draws.len();
    let mut log_q = Vec::with_capacity(s);
    let mut log_p = Vec::with_capacity(s);
    for theta in draws {
        log_q.push(q.log_pdf(theta)?);
        log_p.push(prior.log_pdf(theta)?);
    }

    if !transformed {
        // Expectation-linear path (Eq-9 semantics): per-draw
        // ℓ^D·∇logq + ∇_κ ℓ^D.
        check_estimator(problem, requested)?;
        // The β kind's q-free prior power term: closed form when feasible,
        // otherwise omitted (it shifts the value, never the gradient).
        let prior_const = match spec {
            DivergenceSpec::Beta { beta } => divergence::log_power_integral_of(prior, *beta)
                .map(|l| l.exp() / beta)
                .unwrap_or(0.0),
            _ => 0.0,
        };
        let mut per_draw = vec![vec![0.0; kappa.len()]; s];
        let mut value = 0.0;
        for i in 0..s {
            let ld = divergence::linear_integrand(spec, log_q[i], log_p[i], prior_const);
            value += ld / s as f64;
            let direct_coeff = match spec {
                DivergenceSpec::Kld => 1.0,
                DivergenceSpec::WeightedKld { weight } => 1.0 / weight,
                DivergenceSpec::Alpha { alpha } => {
                    ((1.0 - alpha) * (log_p[i] - log_q[i])).exp() / alpha
                }
                DivergenceSpec::Beta { beta } => ((beta - 1.0) * log_q[i]).exp() / beta,
                _ => unreachable!(),
            };
            for d in 0..kappa.len() {
                per_draw[i][d] = ld * scores[i][d] + direct_coeff * scores[i][d];
            }
        }
        return Ok((EstimatorKind::ExpectationD, Some(per_draw), None, value));
    }

    // τ-transformed path (Eq-10 semantics): chain rule at the sampled means.
    let per_draw = match spec {
        DivergenceSpec::AlphaRenyi { alpha } => {
            let inner: Vec<f64> = log_q
                .iter()
                .zip(&log_p)
                .map(|(&lq, &lp)| ((1.0 - alpha) * (lp - lq)).exp())
                .collect();
            let mean = inner.iter().sum::<f64>() / s as f64;
            let value = mean.ln() / (alpha * (alpha - 1.0));
            let coeff = 1.0 / ((alpha - 1.0) * mean);
            let mut per_draw = vec![vec![0.0; kappa.len()]; s];
            for i in 0..s {
                for d in 0..kappa.len() {
                    per_draw[i][d] = coeff * inner[i] * scores[i][d];
                }
            }
            (per_draw, value)
        }
        DivergenceSpec::Gamma { gamma } => {
            let g = *gamma;
            let u: Vec<f64> = log_q.iter().map(|&lq| ((g - 1.0) * lq).exp()).collect();
            let v: Vec<f64> = log_p.iter().map(|&lp| ((g - 1.0) * lp).exp()).collect();
            let mean_u = u.iter().sum::<f64>() / s as f64;
            let mean_v = v.iter().sum::<f64>() / s as f64;
            // The q-free term log∫π^γ enters the value, not the gradient.
            let prior_term = divergence::log_power_integral_of(problem.prior(), g)
                .map(|l| l / g)
                .unwrap_or(0.0);
            let value =
                mean_u.ln() / (g * (g - 1.0)) - mean_v.ln() / (g - 1.0) + prior_term;
            let coeff_u = 1.0 / ((g - 1.0) * mean_u);
            let coeff_v = -1.0 / ((g - 1.0) * mean_v);
            let mut per_draw = vec![vec![0.0; kappa.len()]; s];
            for i in 0..s {
                for d in 0..kappa.len() {
                    per_draw[i][d] =
                        coeff_u * u[i] * scores[i][d] + coeff_v * v[i] * scores[i][d];
                }
            }
            (per_draw, value)
        }
        _ => unreachable!(),
    };
    Ok((EstimatorKind::BiasedTau, Some(per_draw.0), None, per_draw.1))
}

/// Deterministic minimizer for closed-form objectives: ADAM on central
/// finite differences in the log-reparameterized space, with infeasible
/// probes treated as a large barrier.
pub fn optimize_closed_form(
    objective: impl Fn(&[f64]) -> Result<f64>,
    kappa0: &[f64],
    family: FamilyKind,
) -> Result<Vec<f64>> {
    let positive = family.positive_mask();
    if positive.len() != kappa0.len() {
        return Err(GviError::DimensionMismatch {
            expected: positive.len(),
            got: kappa0.len(),
        });
    }
    let barrier = 1e30;
    let f_u = |u: &[f64]| -> f64 {
        let kappa = to_constrained(u, &positive);
        if kappa.iter().any(|k| !k.is_finite()) {
            return barrier;
        }
        objective(&kappa).unwrap_or(barrier)
    };
    let mut u = to_unconstrained(kappa0, &positive);
    if !f_u(&u).is_finite() || f_u(&u) >= barrier {
        return Err(GviError::NotClosedForm(
            "objective infeasible at the starting point".into(),
        ));
    }
    // Two ADAM phases: a coarse approach and a fine polish.
    for (step_size, iters, tol) in [(0.05f64, 6000usize, 1e-9f64), (0.005, 24_000, 1e-10)] {
        let mut m = vec![0.0; u.len()];
        let mut v = vec![0.0; u.len()];
        let mut quiet = 0usize;
        for t in 1..=iters {
            let mut grad = vec![0.0; u.len()];
            for i in 0..u.len() {
                let h = 1e-6 * u[i].abs().max(1.0);
                let mut up = u.clone();
                up[i] += h;
                let mut down = u.clone();
                down[i] -= h;
                grad[i] = (f_u(&up) - f_u(&down)) / (2.0 * h);
            }
            let mut max_move = 0.0f64;
            for i in 0..u.len() {
                m[i] = 0.9 * m[i] + 0.1 * grad[i];
                v[i] = 0.999 * v[i] + 0.001 * grad[i] * grad[i];
                let m_hat = m[i] / (1.0 - 0.9f64.powi(t as i32));
                let v_hat = v[i] / (1.0 - 0.999f64.powi(t as i32));
                let delta = step_size * m_hat / (v_hat.sqrt() + 1e-8);
                u[i] -= delta;
                max_move = max_move.max(delta.abs());
            }
            if max_move < tol.max(1e-12) {
                quiet += 1;
                if quiet >= 20 {
                    break;
                }
            } else {
                quiet = 0;
            }
        }
    }
    Ok(to_constrained(&u, &positive))
}

/// Coordinate descent over a noise-variance hyperparameter: golden-section
/// search on σ² with a full inner minimization at each probe.
///
/// `build` constructs the fixed-σ² problem; the inner solve warm-starts from
/// the best κ seen so far. Returns (σ²*, κ*).
pub fn optimize_sigma2_outer(
    build: impl Fn(f64) -> Result<GviProblem>,
    kappa0: &[f64],
    bracket: (f64, f64),
    tol: f64,
) -> Result<(f64, Vec<f64>)> {
    let (mut lo, mut hi) = bracket;
    if !(lo > 0.0 && hi > lo) {
        return Err(GviError::InvalidParameter(
            "σ² bracket must satisfy 0 < lo < hi".into(),
        ));
    }
    let inv_phi = 0.5 * (5.0f64.sqrt() - 1.0);
    let mut warm = kappa0.to_vec();
    let value_at = |s2: f64, warm: &[f64]| -> Result<(f64, Vec<f64>)> {
        let problem = build(s2)?;
        let kappa = optimize_closed_form(
            |k| problem.objective(k, crate::problem::EvalStrategy::ClosedForm),
            warm,
            problem.family(),
        )?;
        let value = problem.objective(&kappa, crate::problem::EvalStrategy::ClosedForm)?;
        Ok((value, kappa))
    };
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let (mut f1, k1) = value_at(x1, &warm)?;
    warm = k1.clone();
    let (mut f2, k2) = value_at(x2, &warm)?;
    let mut best = if f1 <= f2 {
        (f1, x1, k1)
    } else {
        (f2, x2, k2)
    };
    while (hi - lo) > tol * (1.0 + lo.abs()) {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            let (f, k) = value_at(x1, &warm)?;
            f1 = f;
            warm = k.clone();
            if f1 < best.0 {
                best = (f1, x1, k);
            }
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            let (f, k) = value_at(x2, &warm)?;
            f2 = f;
            warm = k.clone();
            if f2 < best.0 {
                best = (f2, x2, k);
            }
        }
    }
    let (_, s2, kappa) = best;
    Ok((s2, kappa))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scoring::LossSpec;

    fn assert_close(actual: f64, expected: f64, tol: f64) {
        let diff = (actual - expected).abs();
        assert!(
            diff <= tol,
            "expected {expected}, got {actual}, |diff|={diff}, tol={tol}"
        );
    }

    fn conjugate_problem(divergence: DivergenceSpec) -> GviProblem {
        let loss = LossSpec::new(
            LikelihoodModel::GaussianMean { sigma2: 1.0, dim: 1 },
            ScoreRule::NegLog,
        )
        .unwrap();
        let prior = ExpFamDistribution::univariate_normal(0.0, 1.0).unwrap();
        let data: Vec<Vec<f64>> = [0.8, -0.1, 1.4, 0.3, 0.9, 0.2, -0.4, 1.1]
            .iter()
            .map(|&x| vec![x])
            .collect();
        GviProblem::new(
            loss,
            divergence,
            prior,
            FamilyKind::UnivariateNormal,
            data,
            None,
        )
        .unwrap()
    }

    #[test]
    fn config_validation() {
        let mut config = OptimizerConfig::new(EstimatorKind::Auto, 0, 1, 0);
        assert!(config.validate().is_err());
        config.samples = 4;
        config.adam.beta1 = 1.0;
        assert!(config.validate().is_err());
    }

    #[test]
    fn expectation_d_rejected_for_transformed_kinds() {
        let problem = conjugate_problem(DivergenceSpec::Gamma { gamma: 2.0 });
        let config = OptimizerConfig::new(EstimatorKind::ExpectationD, 4, 8, 0);
        assert!(matches!(
            Optimizer::new(&problem, &[0.0, 1.0], config),
            Err(GviError::EstimatorMismatch(_))
        ));
    }

    #[test]
    fn traces_are_deterministic_per_seed() {
        let problem = conjugate_problem(DivergenceSpec::Kld);
        let mut config = OptimizerConfig::new(EstimatorKind::ClosedD, 8, 8, 42);
        config.max_iters = 40;
        let a = optimize(&problem, &[0.2, 0.5], config.clone()).unwrap();
        let b = optimize(&problem, &[0.2, 0.5], config.clone()).unwrap();
        assert_eq!(a.final_kappa, b.final_kappa);
        assert_eq!(a.records.len(), b.records.len());
        for (ra, rb) in a.records.iter().zip(&b.records) {
            assert_eq!(ra.kappa, rb.kappa);
            assert_eq!(ra.objective, rb.objective);
        }
        config.seed = 43;
        let c = optimize(&problem, &[0.2, 0.5], config).unwrap();
        assert_ne!(a.final_kappa, c.final_kappa);
    }

    #[test]
    fn positivity_is_preserved_along_the_trace() {
        let problem = conjugate_problem(DivergenceSpec::Kld);
        let mut config = OptimizerConfig::new(EstimatorKind::ClosedD, 4, 8, 9);
        config.max_iters = 200;
        config.adam.step_size = 0.2;
        let trace = optimize(&problem, &[0.0, 0.05], config).unwrap();
        for record in &trace.records {
            assert!(record.kappa[1] > 0.0);
        }
    }

    #[test]
    fn closed_and_expectation_estimators_agree_in_mean() {
        let problem = conjugate_problem(DivergenceSpec::Kld);
        let kappa = [0.4, 0.6];
        let reps = 4_000;
        let mut mean_closed = vec![0.0; 2];
        let mut mean_expect = vec![0.0; 2];
        let mut var_closed = vec![0.0; 2];
        let mut var_expect = vec![0.0; 2];
        let config_closed = {
            let mut c = OptimizerConfig::new(EstimatorKind::ClosedD, 4, 8, 0);
            c.control_variate = false;
            c
        };
        let config_expect = {
            let mut c = config_closed.clone();
            c.estimator = EstimatorKind::ExpectationD;
            c
        };
        let mut samples_closed = Vec::new();
        let mut samples_expect = Vec::new();
        for r in 0..reps {
            let g1 = sample_gradient(&problem, &kappa, &config_closed, 1000 + r).unwrap();
            let g2 = sample_gradient(&problem, &kappa, &config_expect, 5_000_000 + r).unwrap();
            assert_eq!(g1.estimator, EstimatorKind::ClosedD);
            assert_eq!(g2.estimator, EstimatorKind::ExpectationD);
            samples_closed.push(g1.gradient);
            samples_expect.push(g2.gradient);
        }
        for d in 0..2 {
            mean_closed[d] =
                samples_closed.iter().map(|g| g[d]).sum::<f64>() / reps as f64;
            mean_expect[d] =
                samples_expect.iter().map(|g| g[d]).sum::<f64>() / reps as f64;
            var_closed[d] = samples_closed
                .iter()
                .map(|g| (g[d] - mean_closed[d]).powi(2))
                .sum::<f64>()
                / (reps as f64 - 1.0);
            var_expect[d] = samples_expect
                .iter()
                .map(|g| (g[d] - mean_expect[d]).powi(2))
                .sum::<f64>()
                / (reps as f64 - 1.0);
            let se = ((var_closed[d] + var_expect[d]) / reps as f64).sqrt();
            assert_close(mean_closed[d], mean_expect[d], 3.0 * se);
        }
    }

    #[test]
    fn rao_blackwellization_reduces_per_coordinate_variance() {
        let loss = LossSpec::new(
            LikelihoodModel::GaussianMean { sigma2: 1.0, dim: 3 },
            ScoreRule::NegLog,
        )
        .unwrap();
        let prior =
            ExpFamDistribution::diagonal_normal(&[0.0, 0.0, 0.0], &[1.0, 1.0, 1.0]).unwrap();
        let data: Vec<Vec<f64>> = (0..10)
            .map(|i| {
                let t = i as f64 * 0.3 - 1.5;
                vec![t, -t, 0.5 * t]
            })
            .collect();
        let problem = GviProblem::new(
            loss,
            DivergenceSpec::Kld,
            prior,
            FamilyKind::DiagonalNormal { dim: 3 },
            data,
            None,
        )
        .unwrap();
        let kappa = [0.2, -0.1, 0.4, 0.8, 1.1, 0.9];
        let base = {
            let mut c = OptimizerConfig::new(EstimatorKind::ClosedD, 64, 10, 0);
            c.control_variate = false;
            c
        };
        let rb = {
            let mut c = base.clone();
            c.rao_blackwellize = true;
            c
        };
        let mut wins = 0usize;
        let mut total = 0usize;
        for r in 0..20 {
            let g_base = sample_gradient(&problem, &kappa, &base, 100 + r).unwrap();
            let g_rb = sample_gradient(&problem, &kappa, &rb, 100 + r).unwrap();
            for d in 0..kappa.len() {
                total += 1;
                if g_rb.sample_variance[d] <= g_base.sample_variance[d] {
                    wins += 1;
                }
            }
        }
        assert!(
            wins as f64 >= 0.9 * total as f64,
            "RB reduced variance on only {wins}/{total} coordinates"
        );
    }

    #[test]
    fn rao_blackwellization_requires_factorized_losses() {
        let loss = LossSpec::new(
            LikelihoodModel::GaussianMixture2 { sigma: 0.65 },
            ScoreRule::NegLog,
        )
        .unwrap();
        let prior = ExpFamDistribution::diagonal_normal(&[0.0, 0.0], &[4.0, 4.0]).unwrap();
        let problem = GviProblem::new(
            loss,
            DivergenceSpec::Kld,
            prior,
            FamilyKind::DiagonalNormal { dim: 2 },
            vec![vec![0.0], vec![1.0]],
            None,
        )
        .unwrap();
        let mut config = OptimizerConfig::new(EstimatorKind::ClosedD, 4, 2, 0);
        config.rao_blackwellize = true;
        assert!(matches!(
            Optimizer::new(&problem, &[0.0, 0.0, 1.0, 1.0], config),
            Err(GviError::EstimatorMismatch(_))
        ));
    }

    #[test]
    fn deterministic_optimizer_solves_the_conjugate_problem() {
        let problem = conjugate_problem(DivergenceSpec::Kld);
        let exact = crate::problem::conjugate_posterior(
            &problem.loss().model,
            problem.prior(),
            problem.data(),
        )
        .unwrap();
        let kappa = optimize_closed_form(
            |k| problem.objective(k, crate::problem::EvalStrategy::ClosedForm),
            &[0.0, 1.0],
            problem.family(),
        )
        .unwrap();
        assert_close(kappa[0], exact.mean_params()[0], 1e-4);
        assert_close(kappa[1], exact.mean_params()[1], 1e-4);
    }

    #[test]
    fn sigma2_outer_loop_recovers_the_noise_scale() {
        // Data from N(θ*, 4); the profile objective over σ² bottoms out near
        // the sample variance around the posterior mean.
        let truth_sigma2 = 4.0;
        let q_gen = ExpFamDistribution::univariate_normal(1.0, truth_sigma2).unwrap();
        let data: Vec<Vec<f64>> = q_gen.sample(200, 77).into_iter().collect();
        let build = |s2: f64| {
            GviProblem::new(
                LossSpec::new(
                    LikelihoodModel::GaussianMean { sigma2: s2, dim: 1 },
                    ScoreRule::NegLog,
                )
                .unwrap(),
                DivergenceSpec::Kld,
                ExpFamDistribution::univariate_normal(0.0, 100.0).unwrap(),
                FamilyKind::UnivariateNormal,
                data.clone(),
                None,
            )
        };
        let (s2, kappa) = optimize_sigma2_outer(build, &[0.0, 1.0], (0.5, 20.0), 1e-4).unwrap();
        let mean: f64 = data.iter().map(|r| r[0]).sum::<f64>() / data.len() as f64;
        let sample_var: f64 =
            data.iter().map(|r| (r[0] - mean).powi(2)).sum::<f64>() / data.len() as f64;
        assert_close(s2, sample_var, 0.35 * sample_var);
        assert_close(kappa[0], mean, 0.1);
    }
}
