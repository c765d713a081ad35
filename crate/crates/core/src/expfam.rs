//! Exponential-family distributions with natural-parameter machinery.
//!
//! Every supported family has a density of the form
//! `h(θ) · exp{ η(κ)ᵀ T(θ) − A(η(κ)) }` with a constant base measure `h`,
//! which is what makes the closed-form divergence algebra in
//! [`crate::divergence`] go through. Parameters are carried twice: in mean
//! space (`κ`: means, variances, shapes, rates — what callers and the
//! optimizer work with) and in natural space (`η(κ)` — what the
//! log-partition algebra works with). The two are kept consistent at
//! construction.
//!
//! Mean-parameter layouts:
//!
//! - `DiagonalNormal { dim: d }`: `[μ_1..μ_d, v_1..v_d]` (variances `v_j`)
//! - `UnivariateNormal`: `[μ, v]`
//! - `NormalInverseGamma { dim: d }`: `[μ_1..μ_d, V_1..V_d, a, b]`, the law of
//!   `(θ, σ²)` with `σ² ~ IG(a, b)` and `θ_j | σ² ~ N(μ_j, σ² V_j)`
//! - `InverseGamma`: `[a, b]`
//!
//! Natural-parameter layouts follow the sufficient statistics
//! `T(θ) = (θ, θ²)` for the normals, `T(σ²) = (1/σ², ln σ²)` for the
//! inverse gamma, and `T(θ, σ²) = (θ/σ², θ²/σ², 1/σ², ln σ²)` for the
//! normal-inverse-gamma.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

use crate::error::{GviError, Result};
use crate::special::{digamma, ln_gamma, LOG_2PI};

/// A supported exponential family.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FamilyKind {
    /// Product of `dim` independent normals over θ ∈ ℝ^dim.
    DiagonalNormal { dim: usize },
    /// Single normal over θ ∈ ℝ.
    UnivariateNormal,
    /// Joint law of (θ ∈ ℝ^dim, σ² > 0) with diagonal scale matrix.
    NormalInverseGamma { dim: usize },
    /// Inverse gamma over σ² > 0.
    InverseGamma,
}

impl FamilyKind {
    /// Dimension of the θ vectors the family is a law over.
    pub fn support_dim(&self) -> usize {
        match *self {
            FamilyKind::DiagonalNormal { dim } => dim,
            FamilyKind::UnivariateNormal => 1,
            FamilyKind::NormalInverseGamma { dim } => dim + 1,
            FamilyKind::InverseGamma => 1,
        }
    }

    /// Length of the mean-parameter vector κ.
    pub fn mean_param_len(&self) -> usize {
        match *self {
            FamilyKind::DiagonalNormal { dim } => 2 * dim,
            FamilyKind::UnivariateNormal => 2,
            FamilyKind::NormalInverseGamma { dim } => 2 * dim + 2,
            FamilyKind::InverseGamma => 2,
        }
    }

    /// Length of the natural-parameter / sufficient-statistic vectors.
    pub fn natural_param_len(&self) -> usize {
        self.mean_param_len()
    }

    fn validate(&self) -> Result<()> {
        let d = match *self {
            FamilyKind::DiagonalNormal { dim } | FamilyKind::NormalInverseGamma { dim } => dim,
            _ => 1,
        };
        if d == 0 {
            return Err(GviError::InvalidParameter(
                "dimension must be at least 1".into(),
            ));
        }
        Ok(())
    }

    /// Which mean parameters are constrained to be strictly positive.
    pub fn positive_mask(&self) -> Vec<bool> {
        match *self {
            FamilyKind::DiagonalNormal { dim } => {
                let mut m = vec![false; dim];
                m.extend(std::iter::repeat(true).take(dim));
                m
            }
            FamilyKind::UnivariateNormal => vec![false, true],
            FamilyKind::NormalInverseGamma { dim } => {
                let mut m = vec![false; dim];
                m.extend(std::iter::repeat(true).take(dim + 2));
                m
            }
            FamilyKind::InverseGamma => vec![true, true],
        }
    }

    /// log h(θ); constant over the support for every supported family.
    pub fn log_base_measure(&self) -> f64 {
        match *self {
            FamilyKind::DiagonalNormal { dim } => -0.5 * dim as f64 * LOG_2PI,
            FamilyKind::UnivariateNormal => -0.5 * LOG_2PI,
            FamilyKind::NormalInverseGamma { dim } => -0.5 * dim as f64 * LOG_2PI,
            FamilyKind::InverseGamma => 0.0,
        }
    }

    /// Membership test for the natural parameter space N = {η : A(η) < ∞}.
    pub fn natural_space_member(&self, eta: &[f64]) -> bool {
        if eta.len() != self.natural_param_len() || eta.iter().any(|v| !v.is_finite()) {
            return false;
        }
        match *self {
            FamilyKind::DiagonalNormal { dim } => eta[dim..2 * dim].iter().all(|&e| e < 0.0),
            FamilyKind::UnivariateNormal => eta[1] < 0.0,
            FamilyKind::NormalInverseGamma { dim } => {
                let precisions_ok = eta[dim..2 * dim].iter().all(|&e| e < 0.0);
                if !precisions_ok {
                    return false;
                }
                let a = -eta[2 * dim + 1] - 1.0 - 0.5 * dim as f64;
                let b = nig_rate_from_natural(eta, dim);
                a > 0.0 && b > 0.0
            }
            FamilyKind::InverseGamma => eta[0] < 0.0 && eta[1] < -1.0,
        }
    }

    /// Log-normalizer A(η), so that `exp{log h + ηᵀT − A}` integrates to one.
    ///
    /// Errors with `OutsideNaturalSpace` when A would be infinite.
    pub fn log_partition(&self, eta: &[f64]) -> Result<f64> {
        if eta.len() != self.natural_param_len() {
            return Err(GviError::DimensionMismatch {
                expected: self.natural_param_len(),
                got: eta.len(),
            });
        }
        if !self.natural_space_member(eta) {
            return Err(GviError::OutsideNaturalSpace(format!(
                "{self:?} at {eta:?}"
            )));
        }
        Ok(match *self {
            FamilyKind::DiagonalNormal { dim } => {
                let mut a = 0.0;
                for j in 0..dim {
                    let e1 = eta[j];
                    let e2 = eta[dim + j];
                    a += 0.5 * (-1.0 / (2.0 * e2)).ln() - e1 * e1 / (4.0 * e2);
                }
                a
            }
            FamilyKind::UnivariateNormal => {
                0.5 * (-1.0 / (2.0 * eta[1])).ln() - eta[0] * eta[0] / (4.0 * eta[1])
            }
            FamilyKind::NormalInverseGamma { dim } => {
                let a_shape = -eta[2 * dim + 1] - 1.0 - 0.5 * dim as f64;
                let b_rate = nig_rate_from_natural(eta, dim);
                let mut a = ln_gamma(a_shape) - a_shape * b_rate.ln();
                for j in 0..dim {
                    a += 0.5 * (-1.0 / (2.0 * eta[dim + j])).ln();
                }
                a
            }
            FamilyKind::InverseGamma => {
                let a_shape = -eta[1] - 1.0;
                let b_rate = -eta[0];
                ln_gamma(a_shape) - a_shape * b_rate.ln()
            }
        })
    }

    /// η(κ): natural parameters from mean parameters.
    pub fn natural_from_mean(&self, kappa: &[f64]) -> Result<Vec<f64>> {
        self.check_mean_params(kappa)?;
        Ok(match *self {
            FamilyKind::DiagonalNormal { dim } => {
                let mut eta = Vec::with_capacity(2 * dim);
                for j in 0..dim {
                    eta.push(kappa[j] / kappa[dim + j]);
                }
                for j in 0..dim {
                    eta.push(-0.5 / kappa[dim + j]);
                }
                eta
            }
            FamilyKind::UnivariateNormal => vec![kappa[0] / kappa[1], -0.5 / kappa[1]],
            FamilyKind::NormalInverseGamma { dim } => {
                let (mu, scale) = (&kappa[..dim], &kappa[dim..2 * dim]);
                let (a, b) = (kappa[2 * dim], kappa[2 * dim + 1]);
                let mut eta = Vec::with_capacity(2 * dim + 2);
                for j in 0..dim {
                    eta.push(mu[j] / scale[j]);
                }
                for j in 0..dim {
                    eta.push(-0.5 / scale[j]);
                }
                let quad: f64 = (0..dim).map(|j| mu[j] * mu[j] / (2.0 * scale[j])).sum();
                eta.push(-(b + quad));
                eta.push(-(a + 1.0 + 0.5 * dim as f64));
                eta
            }
            FamilyKind::InverseGamma => vec![-kappa[1], -(kappa[0] + 1.0)],
        })
    }

    /// κ(η): mean parameters from natural parameters (inverse of `natural_from_mean`).
    pub fn mean_from_natural(&self, eta: &[f64]) -> Result<Vec<f64>> {
        if !self.natural_space_member(eta) {
            return Err(GviError::OutsideNaturalSpace(format!(
                "{self:?} at {eta:?}"
            )));
        }
        Ok(match *self {
            FamilyKind::DiagonalNormal { dim } => {
                let mut kappa = vec![0.0; 2 * dim];
                for j in 0..dim {
                    let v = -0.5 / eta[dim + j];
                    kappa[j] = eta[j] * v;
                    kappa[dim + j] = v;
                }
                kappa
            }
            FamilyKind::UnivariateNormal => {
                let v = -0.5 / eta[1];
                vec![eta[0] * v, v]
            }
            FamilyKind::NormalInverseGamma { dim } => {
                let mut kappa = vec![0.0; 2 * dim + 2];
                for j in 0..dim {
                    let v = -0.5 / eta[dim + j];
                    kappa[j] = eta[j] * v;
                    kappa[dim + j] = v;
                }
                kappa[2 * dim] = -eta[2 * dim + 1] - 1.0 - 0.5 * dim as f64;
                kappa[2 * dim + 1] = nig_rate_from_natural(eta, dim);
                kappa
            }
            FamilyKind::InverseGamma => vec![-eta[1] - 1.0, -eta[0]],
        })
    }

    /// Sufficient statistics T(θ).
    pub fn sufficient_stats(&self, theta: &[f64]) -> Result<Vec<f64>> {
        self.check_support(theta)?;
        Ok(match *self {
            FamilyKind::DiagonalNormal { dim } => {
                let mut t = Vec::with_capacity(2 * dim);
                t.extend_from_slice(theta);
                t.extend(theta.iter().map(|x| x * x));
                t
            }
            FamilyKind::UnivariateNormal => vec![theta[0], theta[0] * theta[0]],
            FamilyKind::NormalInverseGamma { dim } => {
                let s2 = theta[dim];
                let mut t = Vec::with_capacity(2 * dim + 2);
                t.extend(theta[..dim].iter().map(|x| x / s2));
                t.extend(theta[..dim].iter().map(|x| x * x / s2));
                t.push(1.0 / s2);
                t.push(s2.ln());
                t
            }
            FamilyKind::InverseGamma => vec![1.0 / theta[0], theta[0].ln()],
        })
    }

    fn check_support(&self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.support_dim() {
            return Err(GviError::DimensionMismatch {
                expected: self.support_dim(),
                got: theta.len(),
            });
        }
        let scale_ok = match *self {
            FamilyKind::NormalInverseGamma { dim } => theta[dim] > 0.0,
            FamilyKind::InverseGamma => theta[0] > 0.0,
            _ => true,
        };
        if !scale_ok || theta.iter().any(|v| !v.is_finite()) {
            return Err(GviError::OutOfSupport(format!("{self:?} at {theta:?}")));
        }
        Ok(())
    }

    fn check_mean_params(&self, kappa: &[f64]) -> Result<()> {
        if kappa.len() != self.mean_param_len() {
            return Err(GviError::DimensionMismatch {
                expected: self.mean_param_len(),
                got: kappa.len(),
            });
        }
        if kappa.iter().any(|v| !v.is_finite()) {
            return Err(GviError::InvalidParameter(format!(
                "non-finite mean parameter in {kappa:?}"
            )));
        }
        for (value, positive) in kappa.iter().zip(self.positive_mask()) {
            if positive && *value <= 0.0 {
                return Err(GviError::InvalidParameter(format!(
                    "scale/shape parameter must be strictly positive, got {value}"
                )));
            }
        }
        Ok(())
    }
}

/// b recovered from the NIG natural parameters (positive inside N).
fn nig_rate_from_natural(eta: &[f64], dim: usize) -> f64 {
    let quad: f64 = (0..dim)
        .map(|j| eta[j] * eta[j] / (4.0 * eta[dim + j]))
        .sum();
    -eta[2 * dim] + quad
}

/// A member of a supported exponential family, with mean and natural
/// parameters kept consistent.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpFamDistribution {
    kind: FamilyKind,
    mean_params: Vec<f64>,
    natural_params: Vec<f64>,
}

impl ExpFamDistribution {
    /// Construct from mean parameters, validating invariants.
    pub fn from_mean_params(kind: FamilyKind, kappa: &[f64]) -> Result<Self> {
        kind.validate()?;
        let natural_params = kind.natural_from_mean(kappa)?;
        if !kind.natural_space_member(&natural_params) {
            return Err(GviError::OutsideNaturalSpace(format!(
                "{kind:?} at {kappa:?}"
            )));
        }
        Ok(Self {
            kind,
            mean_params: kappa.to_vec(),
            natural_params,
        })
    }

    pub fn diagonal_normal(means: &[f64], variances: &[f64]) -> Result<Self> {
        if means.len() != variances.len() {
            return Err(GviError::DimensionMismatch {
                expected: means.len(),
                got: variances.len(),
            });
        }
        let mut kappa = means.to_vec();
        kappa.extend_from_slice(variances);
        Self::from_mean_params(FamilyKind::DiagonalNormal { dim: means.len() }, &kappa)
    }

    pub fn univariate_normal(mean: f64, variance: f64) -> Result<Self> {
        Self::from_mean_params(FamilyKind::UnivariateNormal, &[mean, variance])
    }

    pub fn normal_inverse_gamma(means: &[f64], scales: &[f64], a: f64, b: f64) -> Result<Self> {
        if means.len() != scales.len() {
            return Err(GviError::DimensionMismatch {
                expected: means.len(),
                got: scales.len(),
            });
        }
        let mut kappa = means.to_vec();
        kappa.extend_from_slice(scales);
        kappa.push(a);
        kappa.push(b);
        Self::from_mean_params(
            FamilyKind::NormalInverseGamma { dim: means.len() },
            &kappa,
        )
    }

    pub fn inverse_gamma(a: f64, b: f64) -> Result<Self> {
        Self::from_mean_params(FamilyKind::InverseGamma, &[a, b])
    }

    pub fn kind(&self) -> FamilyKind {
        self.kind
    }

    pub fn mean_params(&self) -> &[f64] {
        &self.mean_params
    }

    pub fn natural_params(&self) -> &[f64] {
        &self.natural_params
    }

    /// A(η(κ)) for this member; finite by the construction invariant.
    pub fn log_partition_value(&self) -> f64 {
        self.kind
            .log_partition(&self.natural_params)
            .expect("constructed member has finite log-partition")
    }

    /// log density at θ: log h(θ) + η(κ)ᵀ T(θ) − A(η(κ)).
    pub fn log_pdf(&self, theta: &[f64]) -> Result<f64> {
        let t = self.kind.sufficient_stats(theta)?;
        let dot: f64 = self
            .natural_params
            .iter()
            .zip(&t)
            .map(|(e, s)| e * s)
            .sum();
        Ok(self.kind.log_base_measure() + dot - self.log_partition_value())
    }

    /// E_q[T(θ)] componentwise; equals ∇_η A(η).
    pub fn mean_sufficient_stats(&self) -> Vec<f64> {
        match self.kind {
            FamilyKind::DiagonalNormal { dim } => {
                let (mu, v) = (&self.mean_params[..dim], &self.mean_params[dim..]);
                let mut t = mu.to_vec();
                t.extend((0..dim).map(|j| mu[j] * mu[j] + v[j]));
                t
            }
            FamilyKind::UnivariateNormal => {
                let (mu, v) = (self.mean_params[0], self.mean_params[1]);
                vec![mu, mu * mu + v]
            }
            FamilyKind::NormalInverseGamma { dim } => {
                let mu = &self.mean_params[..dim];
                let scale = &self.mean_params[dim..2 * dim];
                let (a, b) = (self.mean_params[2 * dim], self.mean_params[2 * dim + 1]);
                let prec_mean = a / b;
                let mut t: Vec<f64> = mu.iter().map(|m| m * prec_mean).collect();
                t.extend((0..dim).map(|j| mu[j] * mu[j] * prec_mean + scale[j]));
                t.push(prec_mean);
                t.push(b.ln() - digamma(a));
                t
            }
            FamilyKind::InverseGamma => {
                let (a, b) = (self.mean_params[0], self.mean_params[1]);
                vec![a / b, b.ln() - digamma(a)]
            }
        }
    }

    /// Draw `n` i.i.d. samples; deterministic for fixed (self, n, seed).
    ///
    /// Rows are draws; for the normal-inverse-gamma each row is
    /// `[θ_1..θ_d, σ²]` with σ² drawn first.
    pub fn sample(&self, n: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        (0..n).map(|_| self.sample_one(&mut rng)).collect()
    }

    /// One draw using the caller's RNG stream.
    pub fn sample_one<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        match self.kind {
            FamilyKind::DiagonalNormal { dim } => {
                let (mu, v) = (&self.mean_params[..dim], &self.mean_params[dim..]);
                (0..dim)
                    .map(|j| {
                        let z: f64 = StandardNormal.sample(rng);
                        mu[j] + v[j].sqrt() * z
                    })
                    .collect()
            }
            FamilyKind::UnivariateNormal => {
                let z: f64 = StandardNormal.sample(rng);
                vec![self.mean_params[0] + self.mean_params[1].sqrt() * z]
            }
            FamilyKind::NormalInverseGamma { dim } => {
                let mu = &self.mean_params[..dim];
                let scale = &self.mean_params[dim..2 * dim];
                let (a, b) = (self.mean_params[2 * dim], self.mean_params[2 * dim + 1]);
                let s2 = sample_inverse_gamma(rng, a, b);
                let mut draw: Vec<f64> = (0..dim)
                    .map(|j| {
                        let z: f64 = StandardNormal.sample(rng);
                        mu[j] + (s2 * scale[j]).sqrt() * z
                    })
                    .collect();
                draw.push(s2);
                draw
            }
            FamilyKind::InverseGamma => {
                let (a, b) = (self.mean_params[0], self.mean_params[1]);
                vec![sample_inverse_gamma(rng, a, b)]
            }
        }
    }

    /// ∇_κ log q(θ | κ): gradient of the log density in the mean parameters.
    pub fn mean_param_score(&self, theta: &[f64]) -> Result<Vec<f64>> {
        self.kind.check_support(theta)?;
        Ok(match self.kind {
            FamilyKind::DiagonalNormal { dim } => {
                let (mu, v) = (&self.mean_params[..dim], &self.mean_params[dim..]);
                let mut g = vec![0.0; 2 * dim];
                for j in 0..dim {
                    let r = theta[j] - mu[j];
                    g[j] = r / v[j];
                    g[dim + j] = -0.5 / v[j] + r * r / (2.0 * v[j] * v[j]);
                }
                g
            }
            FamilyKind::UnivariateNormal => {
                let (mu, v) = (self.mean_params[0], self.mean_params[1]);
                let r = theta[0] - mu;
                vec![r / v, -0.5 / v + r * r / (2.0 * v * v)]
            }
            FamilyKind::NormalInverseGamma { dim } => {
                let mu = &self.mean_params[..dim];
                let scale = &self.mean_params[dim..2 * dim];
                let (a, b) = (self.mean_params[2 * dim], self.mean_params[2 * dim + 1]);
                let s2 = theta[dim];
                let mut g = vec![0.0; 2 * dim + 2];
                for j in 0..dim {
                    let r = theta[j] - mu[j];
                    g[j] = r / (s2 * scale[j]);
                    g[dim + j] = -0.5 / scale[j] + r * r / (2.0 * s2 * scale[j] * scale[j]);
                }
                g[2 * dim] = b.ln() - digamma(a) - s2.ln();
                g[2 * dim + 1] = a / b - 1.0 / s2;
                g
            }
            FamilyKind::InverseGamma => {
                let (a, b) = (self.mean_params[0], self.mean_params[1]);
                let s2 = theta[0];
                vec![b.ln() - digamma(a) - s2.ln(), a / b - 1.0 / s2]
            }
        })
    }
}

fn sample_inverse_gamma<R: Rng>(rng: &mut R, shape: f64, rate: f64) -> f64 {
    // X ~ Gamma(shape, scale = 1/rate)  =>  1/X ~ InverseGamma(shape, rate).
    let gamma = Gamma::new(shape, 1.0 / rate).expect("validated shape/rate");
    let draw: f64 = gamma.sample(rng);
    1.0 / draw
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_close(actual: f64, expected: f64, tol: f64) {
        let diff = (actual - expected).abs();
        assert!(
            diff <= tol,
            "expected {expected}, got {actual}, |diff|={diff}, tol={tol}"
        );
    }

    #[test]
    fn log_pdf_standard_normal_mode() {
        let q = ExpFamDistribution::univariate_normal(0.0, 1.0).unwrap();
        assert_close(q.log_pdf(&[0.0]).unwrap(), -0.5 * LOG_2PI, 1e-12);
    }

    #[test]
    fn log_pdf_product_of_standard_normals() {
        let q = ExpFamDistribution::diagonal_normal(&[0.0, 0.0], &[1.0, 1.0]).unwrap();
        assert_close(q.log_pdf(&[0.0, 0.0]).unwrap(), -LOG_2PI, 1e-12);
    }

    #[test]
    fn log_pdf_nig_matches_direct_product() {
        // Oracle: N(θ; μ, σ²V) · IG(σ²; a, b) evaluated directly.
        let (mu, v, a, b) = (0.0, 1.0, 2.0, 1.0);
        let q = ExpFamDistribution::normal_inverse_gamma(&[mu], &[v], a, b).unwrap();
        for &(theta, s2) in &[(0.0, 1.0), (0.7, 0.4), (-1.3, 2.5)] {
            let normal = -0.5 * LOG_2PI - 0.5 * (s2 * v).ln() - (theta - mu).powi(2) / (2.0 * s2 * v);
            let ig = a * b.ln() - ln_gamma(a) - (a + 1.0) * s2.ln() - b / s2;
            assert_close(q.log_pdf(&[theta, s2]).unwrap(), normal + ig, 1e-10);
        }
    }

    #[test]
    fn log_pdf_rejects_out_of_support() {
        let q = ExpFamDistribution::inverse_gamma(3.0, 5.0).unwrap();
        assert!(matches!(
            q.log_pdf(&[-1.0]),
            Err(GviError::OutOfSupport(_))
        ));
        let nig = ExpFamDistribution::normal_inverse_gamma(&[0.0], &[1.0], 2.0, 1.0).unwrap();
        assert!(matches!(
            nig.log_pdf(&[0.0, 0.0]),
            Err(GviError::OutOfSupport(_))
        ));
    }

    #[test]
    fn log_partition_diagonal_normal_examples() {
        let kind = FamilyKind::DiagonalNormal { dim: 1 };
        let eta = kind.natural_from_mean(&[0.0, 1.0]).unwrap();
        assert_close(kind.log_partition(&eta).unwrap(), 0.0, 1e-12);
        let eta = kind.natural_from_mean(&[2.0, 4.0]).unwrap();
        assert_close(
            kind.log_partition(&eta).unwrap(),
            2.0f64.ln() + 0.5,
            1e-12,
        );
    }

    #[test]
    fn log_partition_rejects_outside_natural_space() {
        let kind = FamilyKind::DiagonalNormal { dim: 2 };
        let eta = vec![0.0, 0.0, -0.5, 0.1];
        assert!(!kind.natural_space_member(&eta));
        assert!(matches!(
            kind.log_partition(&eta),
            Err(GviError::OutsideNaturalSpace(_))
        ));
    }

    #[test]
    fn natural_space_membership_cases() {
        let kind = FamilyKind::DiagonalNormal { dim: 1 };
        assert!(!kind.natural_space_member(&[0.0, 0.05]));
        assert!(kind.natural_space_member(&[0.0, -0.5]));
        // Convexity: midpoints of members are members.
        let e1 = kind.natural_from_mean(&[1.0, 0.5]).unwrap();
        let e2 = kind.natural_from_mean(&[-2.0, 3.0]).unwrap();
        let mid: Vec<f64> = e1.iter().zip(&e2).map(|(a, b)| 0.5 * a + 0.5 * b).collect();
        assert!(kind.natural_space_member(&mid));
    }

    #[test]
    fn constructors_reject_bad_parameters() {
        assert!(ExpFamDistribution::univariate_normal(0.0, 0.0).is_err());
        assert!(ExpFamDistribution::univariate_normal(0.0, -1.0).is_err());
        assert!(ExpFamDistribution::inverse_gamma(0.0, 1.0).is_err());
        assert!(ExpFamDistribution::inverse_gamma(1.0, -2.0).is_err());
        assert!(ExpFamDistribution::diagonal_normal(&[0.0], &[1.0, 2.0]).is_err());
        assert!(ExpFamDistribution::from_mean_params(
            FamilyKind::DiagonalNormal { dim: 0 },
            &[]
        )
        .is_err());
    }

    #[test]
    fn mean_sufficient_stats_normal_and_inverse_gamma() {
        let q = ExpFamDistribution::univariate_normal(1.5, 0.7).unwrap();
        let t = q.mean_sufficient_stats();
        assert_close(t[0], 1.5, 1e-14);
        assert_close(t[1], 1.5 * 1.5 + 0.7, 1e-14);

        let (a, b) = (3.0, 5.0);
        let ig = ExpFamDistribution::inverse_gamma(a, b).unwrap();
        let t = ig.mean_sufficient_stats();
        assert_close(t[0], a / b, 1e-14);
        assert_close(t[1], b.ln() - digamma(a), 1e-12);
    }

    #[test]
    fn mean_sufficient_stats_equal_log_partition_gradient() {
        // ∇_η A(η) = E[T(θ)], checked by central differences.
        let members = vec![
            ExpFamDistribution::diagonal_normal(&[0.3, -1.2], &[0.8, 2.5]).unwrap(),
            ExpFamDistribution::univariate_normal(-0.4, 1.9).unwrap(),
            ExpFamDistribution::inverse_gamma(3.5, 2.0).unwrap(),
            ExpFamDistribution::normal_inverse_gamma(&[1.0, -0.5], &[0.6, 1.4], 4.0, 3.0)
                .unwrap(),
        ];
        for q in members {
            let kind = q.kind();
            let eta = q.natural_params().to_vec();
            let expected = q.mean_sufficient_stats();
            for i in 0..eta.len() {
                let h = 1e-5 * eta[i].abs().max(1.0);
                let mut plus = eta.clone();
                plus[i] += h;
                let mut minus = eta.clone();
                minus[i] -= h;
                let fd = (kind.log_partition(&plus).unwrap()
                    - kind.log_partition(&minus).unwrap())
                    / (2.0 * h);
                assert_close(fd, expected[i], 1e-5 * (1.0 + expected[i].abs()));
            }
        }
    }

    #[test]
    fn round_trip_mean_natural_identity() {
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        for _ in 0..1000 {
            let dim = rng.random_range(1..=4usize);
            let kinds = [
                FamilyKind::DiagonalNormal { dim },
                FamilyKind::UnivariateNormal,
                FamilyKind::NormalInverseGamma { dim },
                FamilyKind::InverseGamma,
            ];
            let kind = kinds[rng.random_range(0..kinds.len())];
            let kappa: Vec<f64> = kind
                .positive_mask()
                .iter()
                .map(|&pos| {
                    if pos {
                        rng.random_range(0.05..20.0)
                    } else {
                        rng.random_range(-10.0..10.0)
                    }
                })
                .collect();
            let eta = kind.natural_from_mean(&kappa).unwrap();
            let back = kind.mean_from_natural(&eta).unwrap();
            for (orig, round) in kappa.iter().zip(&back) {
                let rel = (orig - round).abs() / orig.abs().max(1.0);
                assert!(rel <= 1e-12, "round trip failed: {orig} vs {round}");
            }
        }
    }

    #[test]
    fn sampling_is_deterministic_per_seed() {
        let q = ExpFamDistribution::normal_inverse_gamma(&[0.0, 1.0], &[1.0, 2.0], 3.0, 4.0)
            .unwrap();
        assert_eq!(q.sample(50, 99), q.sample(50, 99));
        assert_ne!(q.sample(50, 99), q.sample(50, 100));
    }

    #[test]
    fn sample_means_match_moments() {
        let n = 100_000;

        let q = ExpFamDistribution::univariate_normal(0.0, 1.0).unwrap();
        let mean: f64 = q.sample(n, 1).iter().map(|d| d[0]).sum::<f64>() / n as f64;
        assert!(mean.abs() <= 3.0 / (n as f64).sqrt());

        let (a, b) = (3.0, 5.0);
        let ig = ExpFamDistribution::inverse_gamma(a, b).unwrap();
        let draws = ig.sample(n, 2);
        let mean: f64 = draws.iter().map(|d| d[0]).sum::<f64>() / n as f64;
        let expected = b / (a - 1.0);
        // Var = b²/((a−1)²(a−2)) for a > 2.
        let sd = (b * b / ((a - 1.0) * (a - 1.0) * (a - 2.0)) / n as f64).sqrt();
        assert_close(mean, expected, 3.0 * sd);
    }

    #[test]
    fn nig_sample_covariance_matches_analytic_moments() {
        // Marginal Var(θ_j) = (b/(a−1)) · V_j under the joint law.
        let (a, b) = (5.0, 4.0);
        let scales = [0.5, 2.0];
        let q = ExpFamDistribution::normal_inverse_gamma(&[1.0, -2.0], &scales, a, b).unwrap();
        let n = 100_000;
        let draws = q.sample(n, 3);
        for j in 0..2 {
            let mean: f64 = draws.iter().map(|d| d[j]).sum::<f64>() / n as f64;
            let var: f64 =
                draws.iter().map(|d| (d[j] - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            let expected = b / (a - 1.0) * scales[j];
            // Kurtosis of the t-like marginal inflates the variance of the
            // sample variance; 3 SE with a generous fourth-moment bound.
            let se = expected * (8.0 / n as f64).sqrt();
            assert_close(var, expected, 3.0 * se);
        }
    }

    #[test]
    fn empirical_sufficient_stats_match_expectation() {
        let q = ExpFamDistribution::normal_inverse_gamma(&[0.5], &[1.5], 6.0, 3.0).unwrap();
        let n = 200_000;
        let draws = q.sample(n, 11);
        let expected = q.mean_sufficient_stats();
        let len = expected.len();
        let mut acc = vec![0.0; len];
        for d in &draws {
            let t = q.kind().sufficient_stats(d).unwrap();
            for (a, v) in acc.iter_mut().zip(&t) {
                *a += v;
            }
        }
        for (i, a) in acc.iter().enumerate() {
            let mean = a / n as f64;
            assert_close(mean, expected[i], 0.05 * (1.0 + expected[i].abs()));
        }
    }

    #[test]
    fn mean_param_score_matches_finite_differences() {
        let members = vec![
            ExpFamDistribution::diagonal_normal(&[0.3, -1.2], &[0.8, 2.5]).unwrap(),
            ExpFamDistribution::inverse_gamma(3.5, 2.0).unwrap(),
            ExpFamDistribution::normal_inverse_gamma(&[1.0], &[0.6], 4.0, 3.0).unwrap(),
        ];
        let thetas: Vec<Vec<f64>> = vec![vec![0.9, -0.4], vec![1.7], vec![0.2, 1.3]];
        for (q, theta) in members.iter().zip(&thetas) {
            let grad = q.mean_param_score(theta).unwrap();
            let kappa = q.mean_params().to_vec();
            for i in 0..kappa.len() {
                let h = 1e-6 * kappa[i].abs().max(1.0);
                let mut plus = kappa.clone();
                plus[i] += h;
                let mut minus = kappa.clone();
                minus[i] -= h;
                let qp = ExpFamDistribution::from_mean_params(q.kind(), &plus).unwrap();
                let qm = ExpFamDistribution::from_mean_params(q.kind(), &minus).unwrap();
                let fd =
                    (qp.log_pdf(theta).unwrap() - qm.log_pdf(theta).unwrap()) / (2.0 * h);
                assert_close(grad[i], fd, 1e-5 * (1.0 + fd.abs()));
            }
        }
    }
}
