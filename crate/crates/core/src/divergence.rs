//! Uncertainty quantifiers D(q‖π): closed forms with feasibility checks,
//! Monte-Carlo fallback estimators, and gradients for the optimizer.
//!
//! Closed forms hold between two members of the same exponential family and
//! reduce to log-partition differences; their feasibility is a
//! natural-parameter-space membership question decided before evaluation.
//! When a combination is infeasible the functions return
//! [`GviError::NotClosedForm`] rather than silently falling back — the
//! caller owns the fallback policy.

use crate::error::{GviError, Result};
use crate::expfam::{ExpFamDistribution, FamilyKind};
use crate::special::log_sum_exp;

/// A divergence kind with its hyperparameters.
///
/// Hyperparameters exclude {0, 1} exactly; the KLD is every kind's limit at
/// one, and callers who want that limit pick `Kld` directly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DivergenceSpec {
    Kld,
    /// (1/w)·KLD for w > 0.
    WeightedKld { weight: f64 },
    Alpha { alpha: f64 },
    AlphaRenyi { alpha: f64 },
    Beta { beta: f64 },
    Gamma { gamma: f64 },
}

impl DivergenceSpec {
    /// Validate hyperparameter constraints.
    pub fn validate(&self) -> Result<()> {
        let check = |h: f64, name: &str| {
            if !h.is_finite() || h == 0.0 || h == 1.0 {
                Err(GviError::InvalidParameter(format!(
                    "{name} hyperparameter must be finite and outside {{0, 1}}, got {h}"
                )))
            } else {
                Ok(())
            }
        };
        match *self {
            DivergenceSpec::Kld => Ok(()),
            DivergenceSpec::WeightedKld { weight } => {
                if weight > 0.0 && weight.is_finite() {
                    Ok(())
                } else {
                    Err(GviError::InvalidParameter(format!(
                        "weight must be strictly positive, got {weight}"
                    )))
                }
            }
            DivergenceSpec::Alpha { alpha } => check(alpha, "alpha"),
            DivergenceSpec::AlphaRenyi { alpha } => check(alpha, "alpha-renyi"),
            DivergenceSpec::Beta { beta } => check(beta, "beta"),
            DivergenceSpec::Gamma { gamma } => check(gamma, "gamma"),
        }
    }
}

/// How a divergence value was produced.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EvalPath {
    ClosedForm,
    MonteCarlo {
        samples: usize,
        std_error: f64,
        /// True for log-transformed kinds where the estimator is consistent
        /// but biased at finite sample count.
        transform_biased: bool,
    },
}

/// A divergence value together with its provenance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DivergenceValue {
    pub value: f64,
    pub path: EvalPath,
}

fn require_same_family(q: &ExpFamDistribution, p: &ExpFamDistribution) -> Result<FamilyKind> {
    if q.kind() != p.kind() {
        return Err(GviError::FamilyMismatch(format!(
            "{:?} vs {:?}",
            q.kind(),
            p.kind()
        )));
    }
    Ok(q.kind())
}

/// log ∫ q^c dθ = A(c·η) − c·A(η) + (c−1)·log h.
fn log_power_integral(dist: &ExpFamDistribution, c: f64) -> Result<f64> {
    let kind = dist.kind();
    let eta: Vec<f64> = dist.natural_params().iter().map(|e| c * e).collect();
    let a = kind.log_partition(&eta).map_err(|_| {
        GviError::NotClosedForm(format!("c·η outside natural space for c = {c}"))
    })?;
    Ok(a - c * dist.log_partition_value() + (c - 1.0) * kind.log_base_measure())
}

/// log ∫ q^{c1} p^{c2} dθ = A(c1·η_q + c2·η_p) − c1·A(η_q) − c2·A(η_p) + (c1+c2−1)·log h.
fn log_cross_integral(
    q: &ExpFamDistribution,
    p: &ExpFamDistribution,
    c1: f64,
    c2: f64,
) -> Result<f64> {
    let kind = require_same_family(q, p)?;
    let eta: Vec<f64> = q
        .natural_params()
        .iter()
        .zip(p.natural_params())
        .map(|(eq, ep)| c1 * eq + c2 * ep)
        .collect();
    let a = kind.log_partition(&eta).map_err(|_| {
        GviError::NotClosedForm(format!(
            "c1·η_q + c2·η_p outside natural space for (c1, c2) = ({c1}, {c2})"
        ))
    })?;
    Ok(a - c1 * q.log_partition_value() - c2 * p.log_partition_value()
        + (c1 + c2 - 1.0) * kind.log_base_measure())
}

/// log ∫ q^c dθ; feasibility-checked. Used by the evidence-bound machinery.
pub(crate) fn log_power_integral_of(dist: &ExpFamDistribution, c: f64) -> Result<f64> {
    log_power_integral(dist, c)
}

/// log ∫ q^{c1} p^{c2} dθ; feasibility-checked.
pub(crate) fn log_cross_integral_of(
    q: &ExpFamDistribution,
    p: &ExpFamDistribution,
    c1: f64,
    c2: f64,
) -> Result<f64> {
    log_cross_integral(q, p, c1, c2)
}

/// KLD(q‖p) = A(η_p) − A(η_q) + (η_q − η_p)ᵀ E_q[T].
fn kld_closed(q: &ExpFamDistribution, p: &ExpFamDistribution) -> Result<f64> {
    require_same_family(q, p)?;
    let t = q.mean_sufficient_stats();
    let dot: f64 = q
        .natural_params()
        .iter()
        .zip(p.natural_params())
        .zip(&t)
        .map(|((eq, ep), t)| (eq - ep) * t)
        .sum();
    Ok(p.log_partition_value() - q.log_partition_value() + dot)
}

/// Closed-form divergence value with feasibility checking.
///
/// `NotClosedForm` signals that the natural-parameter combination the closed
/// form needs leaves the natural space; the caller should fall back to
/// [`mc_estimate`].
pub fn closed_form(
    q: &ExpFamDistribution,
    p: &ExpFamDistribution,
    spec: &DivergenceSpec,
) -> Result<DivergenceValue> {
    spec.validate()?;
    require_same_family(q, p)?;
    let value = match *spec {
        DivergenceSpec::Kld => kld_closed(q, p)?,
        DivergenceSpec::WeightedKld { weight } => kld_closed(q, p)? / weight,
        DivergenceSpec::Alpha { alpha } => {
            let log_c = log_cross_integral(q, p, alpha, 1.0 - alpha)?;
            (1.0 - log_c.exp()) / (alpha * (1.0 - alpha))
        }
        DivergenceSpec::AlphaRenyi { alpha } => {
            let log_c = log_cross_integral(q, p, alpha, 1.0 - alpha)?;
            log_c / (alpha * (alpha - 1.0))
        }
        DivergenceSpec::Beta { beta } => {
            let l_q = log_power_integral(q, beta)?;
            let l_p = log_power_integral(p, beta)?;
            let l_cross = log_cross_integral(q, p, 1.0, beta - 1.0)?;
            l_q.exp() / (beta * (beta - 1.0)) + l_p.exp() / beta
                - l_cross.exp() / (beta - 1.0)
        }
        DivergenceSpec::Gamma { gamma } => {
            let l_q = log_power_integral(q, gamma)?;
            let l_p = log_power_integral(p, gamma)?;
            let l_cross = log_cross_integral(q, p, 1.0, gamma - 1.0)?;
            l_q / (gamma * (gamma - 1.0)) + l_p / gamma - l_cross / (gamma - 1.0)
        }
    };
    Ok(DivergenceValue {
        value,
        path: EvalPath::ClosedForm,
    })
}

/// The integrand ℓ^D with D = E_q[ℓ^D], for expectation-linear kinds.
///
/// For `Beta`, the q-free term (1/β)∫π^β is a constant; `prior_power_term`
/// supplies it (closed form or an independent estimate) so the expectation
/// matches the divergence exactly.
pub(crate) fn linear_integrand(
    spec: &DivergenceSpec,
    log_q: f64,
    log_p: f64,
    prior_power_term: f64,
) -> f64 {
    match *spec {
        DivergenceSpec::Kld => log_q - log_p,
        DivergenceSpec::WeightedKld { weight } => (log_q - log_p) / weight,
        DivergenceSpec::Alpha { alpha } => {
            (1.0 - ((1.0 - alpha) * (log_p - log_q)).exp()) / (alpha * (1.0 - alpha))
        }
        DivergenceSpec::Beta { beta } => {
            ((beta - 1.0) * log_q).exp() / (beta * (beta - 1.0))
                - ((beta - 1.0) * log_p).exp() / (beta - 1.0)
                + prior_power_term
        }
        _ => unreachable!("not an expectation-linear divergence"),
    }
}

/// Monte-Carlo estimate of D(q‖p).
///
/// Expectation-linear kinds (KLD, weighted KLD, α, β) report the sample mean
/// of the integrand with its standard error. Log-transformed kinds (Rényi-α,
/// γ) apply the transform to inner sample means; the estimate is consistent
/// but biased at finite S, flagged in the path metadata, with a delta-method
/// standard error. The β/γ prior-only power term is estimated from an
/// independent stream of prior draws so the whole path stays sampling-based.
pub fn mc_estimate(
    q: &ExpFamDistribution,
    p: &ExpFamDistribution,
    spec: &DivergenceSpec,
    samples: usize,
    seed: u64,
) -> Result<DivergenceValue> {
    spec.validate()?;
    require_same_family(q, p)?;
    if samples < 100 {
        return Err(GviError::InvalidParameter(format!(
            "mc_estimate needs at least 100 samples, got {samples}"
        )));
    }
    let draws = q.sample(samples, seed);
    let mut log_q = Vec::with_capacity(samples);
    let mut log_p = Vec::with_capacity(samples);
    for theta in &draws {
        log_q.push(q.log_pdf(theta)?);
        log_p.push(p.log_pdf(theta)?);
    }
    let s = samples as f64;

    let mean_se = |values: &[f64]| -> (f64, f64) {
        let mean = values.iter().sum::<f64>() / s;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (s - 1.0);
        (mean, (var / s).sqrt())
    };

    match *spec {
        DivergenceSpec::Kld | DivergenceSpec::WeightedKld { .. } | DivergenceSpec::Alpha { .. } => {
            let integrand: Vec<f64> = log_q
                .iter()
                .zip(&log_p)
                .map(|(&lq, &lp)| linear_integrand(spec, lq, lp, 0.0))
                .collect();
            let (mean, se) = mean_se(&integrand);
            Ok(DivergenceValue {
                value: mean,
                path: EvalPath::MonteCarlo {
                    samples,
                    std_error: se,
                    transform_biased: false,
                },
            })
        }
        DivergenceSpec::Beta { beta } => {
            // (1/β) ∫π^β = (1/β) E_π[π^{β−1}], from an independent prior stream.
            let prior_draws = p.sample(samples, seed ^ 0x9e37_79b9_7f4a_7c15);
            let mut prior_pow = Vec::with_capacity(samples);
            for theta in &prior_draws {
                prior_pow.push(((beta - 1.0) * p.log_pdf(theta)?).exp() / beta);
            }
            let (prior_term, prior_se) = mean_se(&prior_pow);
            let integrand: Vec<f64> = log_q
                .iter()
                .zip(&log_p)
                .map(|(&lq, &lp)| linear_integrand(spec, lq, lp, 0.0))
                .collect();
            let (mean, se) = mean_se(&integrand);
            Ok(DivergenceValue {
                value: mean + prior_term,
                path: EvalPath::MonteCarlo {
                    samples,
                    std_error: (se * se + prior_se * prior_se).sqrt(),
                    transform_biased: false,
                },
            })
        }
        DivergenceSpec::AlphaRenyi { alpha } => {
            // D = τ(E_q[(p/q)^{1−α}]) with τ(z) = log(z)/(α(α−1)).
            let exponents: Vec<f64> = log_q
                .iter()
                .zip(&log_p)
                .map(|(&lq, &lp)| (1.0 - alpha) * (lp - lq))
                .collect();
            let log_mean = log_sum_exp(&exponents) - s.ln();
            // Delta method on the mean of r = exp(exponent).
            let ratios: Vec<f64> = exponents.iter().map(|e| (e - log_mean).exp()).collect();
            let var_rel =
                ratios.iter().map(|r| (r - 1.0).powi(2)).sum::<f64>() / (s - 1.0);
            let se_log_mean = (var_rel / s).sqrt();
            let coeff = 1.0 / (alpha * (alpha - 1.0));
            Ok(DivergenceValue {
                value: coeff * log_mean,
                path: EvalPath::MonteCarlo {
                    samples,
                    std_error: coeff.abs() * se_log_mean,
                    transform_biased: true,
                },
            })
        }
        DivergenceSpec::Gamma { gamma } => {
            // Three log-mean terms: two under q (correlated), one under π.
            let g = gamma;
            let exp_q: Vec<f64> = log_q.iter().map(|&lq| (g - 1.0) * lq).collect();
            let exp_cross: Vec<f64> = log_p.iter().map(|&lp| (g - 1.0) * lp).collect();
            let log_mean_q = log_sum_exp(&exp_q) - s.ln();
            let log_mean_cross = log_sum_exp(&exp_cross) - s.ln();

            let prior_draws = p.sample(samples, seed ^ 0x9e37_79b9_7f4a_7c15);
            let mut exp_prior = Vec::with_capacity(samples);
            for theta in &prior_draws {
                exp_prior.push((g - 1.0) * p.log_pdf(theta)?);
            }
            let log_mean_prior = log_sum_exp(&exp_prior) - s.ln();

            let value = log_mean_q / (g * (g - 1.0)) + log_mean_prior / g
                - log_mean_cross / (g - 1.0);

            // Delta method: v = c1·log m1 + c2·log m2 + c3·log m3 with
            // (m1, m3) estimated from the same q-draws.
            let c1 = 1.0 / (g * (g - 1.0));
            let c3 = -1.0 / (g - 1.0);
            let r1: Vec<f64> = exp_q.iter().map(|e| (e - log_mean_q).exp()).collect();
            let r3: Vec<f64> = exp_cross
                .iter()
                .map(|e| (e - log_mean_cross).exp())
                .collect();
            let mut var = 0.0;
            for (a, b) in r1.iter().zip(&r3) {
                var += (c1 * (a - 1.0) + c3 * (b - 1.0)).powi(2);
            }
            var /= s - 1.0;
            let var_prior = exp_prior
                .iter()
                .map(|e| ((e - log_mean_prior).exp() - 1.0).powi(2))
                .sum::<f64>()
                / (s - 1.0);
            let se = ((var + var_prior / (g * g)) / s).sqrt();
            Ok(DivergenceValue {
                value,
                path: EvalPath::MonteCarlo {
                    samples,
                    std_error: se,
                    transform_biased: true,
                },
            })
        }
    }
}

/// Gradient of the closed-form divergence with respect to the variational
/// mean parameters κ, by central finite differences on the closed form.
///
/// Deterministic and smooth; step is 1e-5·max(1, |κ_i|). `NotClosedForm`
/// propagates if the closed form is infeasible at (or adjacent to) κ.
pub fn divergence_gradient(
    q_family: FamilyKind,
    kappa: &[f64],
    p: &ExpFamDistribution,
    spec: &DivergenceSpec,
) -> Result<Vec<f64>> {
    let value_at = |k: &[f64]| -> Result<f64> {
        let q = ExpFamDistribution::from_mean_params(q_family, k)?;
        Ok(closed_form(&q, p, spec)?.value)
    };
    // Evaluate once up front so infeasibility at κ itself reports cleanly.
    value_at(kappa)?;
    let mut grad = vec![0.0; kappa.len()];
    for i in 0..kappa.len() {
        let h = 1e-5 * kappa[i].abs().max(1.0);
        let mut plus = kappa.to_vec();
        plus[i] += h;
        let mut minus = kappa.to_vec();
        minus[i] -= h;
        match (value_at(&plus), value_at(&minus)) {
            (Ok(f_plus), Ok(f_minus)) => grad[i] = (f_plus - f_minus) / (2.0 * h),
            // One-sided fallback when a probe crosses a feasibility boundary.
            (Ok(f_plus), Err(_)) => grad[i] = (f_plus - value_at(kappa)?) / h,
            (Err(_), Ok(f_minus)) => grad[i] = (value_at(kappa)? - f_minus) / h,
            (Err(e), Err(_)) => return Err(e),
        }
    }
    Ok(grad)
}
