use thiserror::Error;

use crate::rds::Subbundle;

/// Errors raised by model evaluation, rate estimation and the solvers.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("time {0} is not an integer, but the system runs in discrete time")]
    NonIntegerTime(f64),

    #[error("negative-time application on E^{0} needs a model-supplied restricted inverse")]
    MissingBackwardMap(Subbundle),

    #[error("time {t} is outside the domain of the {subbundle} bound")]
    BoundDomain { subbundle: Subbundle, t: f64 },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("vector is not in the center fiber (off-fiber component {0:e})")]
    NotInCenterFiber(f64),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("partial sums of {quantity} keep growing (last-quarter increase {increase:e})")]
    Divergence { quantity: &'static str, increase: f64 },

    #[error("sigma + tau = {0} violates sigma + tau < 1/2")]
    SmallnessViolated(f64),

    #[error("fixed point did not converge after {iterations} iterations (last change {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("observed contraction ratio {0} is not below 1")]
    NotContracting(f64),

    #[error("model precondition violated: {inequality} (margin {margin:e})")]
    Precondition { inequality: String, margin: f64 },

    #[error("unknown corollary tag `{0}`")]
    UnknownTag(String),

    #[error("model lacks data required by {0}")]
    MissingData(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
