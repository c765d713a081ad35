//! Generalized variational inference over exponential families.
//!
//! A posterior belief is the minimizer of an objective with three arguments:
//! an additive loss over the observations, a divergence penalizing deviation
//! from the prior, and a variational family the belief is constrained to.
//! Standard variational inference is the special case where the loss is a
//! negative log likelihood and the divergence is the Kullback-Leibler
//! divergence; swapping either argument changes how the data are scored or
//! how uncertainty is shaped without touching the other.
//!
//! The crate is organized along those arguments:
//!
//! - [`expfam`]: exponential-family distributions with natural-parameter
//!   machinery (log-densities, sampling, log-partition, sufficient-statistic
//!   expectations, natural-space membership).
//! - [`divergence`]: the uncertainty-quantifier zoo (KLD, weighted KLD,
//!   α, Rényi-α, β, γ) with closed forms, feasibility checks, Monte-Carlo
//!   estimators and gradients.
//! - [`scoring`]: loss functions, including the robust β- and γ-scores with
//!   their power-integral terms and closed-form Gaussian expectations.
//! - [`problem`]: assembling and evaluating the objective, conjugate and
//!   quasi-conjugate closed forms, evidence-bound reports, influence.
//! - [`bbgvi`]: the black-box stochastic optimizer (score-function gradient
//!   estimators, control variates, ADAM).
//! - [`oracle`]: independent ground-truth machinery for tests (adaptive
//!   quadrature, finite differences, grid search).

pub mod bbgvi;
pub mod divergence;
mod error;
pub mod expfam;
pub mod oracle;
pub mod problem;
pub mod scoring;
pub mod special;

pub use bbgvi::{
    optimize, optimize_closed_form, AdamParams, EstimatorKind, GradientEstimate, Optimizer,
    OptimizerConfig, OptimizationTrace, Stopping,
};
pub use divergence::{DivergenceSpec, DivergenceValue, EvalPath};
pub use error::GviError;
pub use expfam::{ExpFamDistribution, FamilyKind};
pub use problem::{BoundReport, EvalStrategy, GviProblem, NigRegressionPosterior};
pub use scoring::{LikelihoodModel, LossSpec, ScoreRule};
