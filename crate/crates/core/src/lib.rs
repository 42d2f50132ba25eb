//! Center manifolds of random dynamical systems with generalized
//! trichotomies, computed by the Lyapunov-Perron method.
//!
//! The crate is organised bottom-up: [`rds`] holds the model vocabulary,
//! [`rates`] the smallness quantities and hypothesis checkers, [`solver`]
//! and [`continuous`] the fixed-point solvers, [`zoo`] ready-made models and
//! [`oracle`] brute-force references used for cross-checks.

// `!(x > 0.0)` is used on purpose so that NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod continuous;
pub mod error;
pub mod norm;
pub mod oracle;
pub mod rates;
pub mod rds;
pub mod solver;
pub mod zoo;

pub use error::{Error, Result};
pub use norm::VectorNorm;
