use alloc::string::String;
use alloc::vec::Vec;

use thiserror::Error;

/// Errors raised by divergence evaluation, estimation and influence analysis.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the domain where the requested quantity is finite or defined.
    #[error("domain error: {0}")]
    Domain(String),
    /// Estimation was asked to work on an empty sample.
    #[error("empty data")]
    EmptyData,
    #[error("no convergence after {iterations} iterations")]
    NonConvergence { iterations: usize },
    #[error("minimizer pinned to the bracket edge at {theta:?}")]
    BoundaryHit { theta: Vec<f64> },
    /// The curvature matrix is singular or its condition number exceeds the guard.
    #[error("J matrix is singular or ill-conditioned (condition number {condition:e})")]
    SingularJ { condition: f64 },
    #[error("tolerance level {c} outside the attainable range [0, {max}]")]
    OutOfRange { c: f64, max: f64 },
}

pub type Result<T> = core::result::Result<T, Error>;

macro_rules! domain {
    ($($arg:tt)*) => {
        $crate::error::Error::Domain(alloc::format!($($arg)*))
    };
}
pub(crate) use domain;
