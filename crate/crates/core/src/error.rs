//! Crate-wide error type.

use thiserror::Error;

use crate::propagation::InferenceResult;

#[derive(Debug, Error)]
pub enum Error {
    /// Structural validation failed (bad scope, shape mismatch, non-finite
    /// table entry, invalid option value, ...).
    #[error("invalid model: {0}")]
    InvalidModel(String),

    /// Bad argument to an operation (wrong graph family, dimension
    /// mismatch, unknown name).
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Text-format parse failure; `line` is 1-based.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    /// The exact-inference guard tripped.
    #[error("model too large for exact inference: {0}")]
    TooLarge(String),

    /// A factor counting number is zero, so the message exponents are
    /// undefined.
    #[error("zero counting number on factor {factor}")]
    ZeroFactorCount { factor: usize },

    /// `c_alpha - q_i + 1` vanished for an incident (variable, factor)
    /// pair; the update exponents are singular there.
    #[error("singular message exponent at factor {factor}, variable {var}")]
    SingularExponent { factor: usize, var: usize },

    /// A message update produced a non-finite value. `last` holds the
    /// result extracted from the final finite iterate so callers can still
    /// record the run as a non-converged data point.
    #[error("non-finite message at iteration {iteration} on edge (factor {factor}, variable {var})")]
    NonFiniteMessage {
        iteration: usize,
        factor: usize,
        var: usize,
        last: Box<InferenceResult<f64>>,
    },

    /// A constraint system has no solution.
    #[error("infeasible constraint system: {0}")]
    Infeasible(String),

    /// A solver failed to reach its tolerance or hit a degenerate state.
    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
