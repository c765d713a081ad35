use thiserror::Error;

/// Errors shared across the crate.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum GviError {
    /// Construction-time parameter violation (non-positive variance, bad dimension, ...).
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    /// Point lies outside the support of the distribution.
    #[error("out of support: {0}")]
    OutOfSupport(String),
    /// A natural-parameter vector with infinite log-partition.
    #[error("outside the natural parameter space: {0}")]
    OutsideNaturalSpace(String),
    /// Two distributions from different families where one family was required.
    #[error("family mismatch: {0}")]
    FamilyMismatch(String),
    /// The closed-form feasibility predicate failed; the caller decides the fallback.
    #[error("no closed form: {0}")]
    NotClosedForm(String),
    /// Score hyperparameter equal to one; the limit is the log score, use it directly.
    #[error("score hyperparameter must not equal 1 (the limit is the negative log score)")]
    HyperparameterOne,
    /// Expectation requested under a variational family it is not derived for.
    #[error("unsupported family: {0}")]
    UnsupportedFamily(String),
    /// Model/prior pairing is not conjugate.
    #[error("non-conjugate model/prior pairing: {0}")]
    NonConjugate(String),
    /// Quasi-conjugate feasibility fails at one observation.
    #[error("quasi-conjugate natural-parameter shift infeasible at observation {index}")]
    Infeasible { index: usize },
    /// Requested gradient estimator cannot serve the problem's divergence.
    #[error("estimator mismatch: {0}")]
    EstimatorMismatch(String),
    /// Objective or gradient became non-finite during optimization.
    #[error("non-finite value at iteration {iteration}: {what}")]
    NonFinite { iteration: usize, what: String },
    /// Adaptive quadrature failed to reach the requested tolerance.
    #[error("quadrature did not converge: error estimate {error:.3e} > tolerance")]
    NoConvergence { error: f64 },
    /// Dimension mismatch between an input and what the object expects.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

pub(crate) type Result<T> = std::result::Result<T, GviError>;
