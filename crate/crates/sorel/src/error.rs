//! Crate-wide error type.

use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {message}")]
    InvalidParameter { name: &'static str, message: String },

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("sample index {index} out of range for n = {n}")]
    IndexOutOfRange { index: usize, n: usize },

    #[error("non-finite value encountered in {context}")]
    NonFinite { context: &'static str },

    #[error("point lies outside the permutahedron (violation {violation:.3e} at tolerance {tol:.1e})")]
    NotInPermutahedron { violation: f64, tol: f64 },

    #[error("iterates diverged (|w| reached {norm:.3e}); the step size is likely too large")]
    Diverged { norm: f64 },

    #[error("tolerance {target:.3e} not reached after {iterations} iterations (achieved {achieved:.3e})")]
    ToleranceNotReached {
        target: f64,
        achieved: f64,
        iterations: usize,
    },

    #[error("degenerate suboptimality denominator (numerator scale {denominator:.3e})")]
    DegenerateDenominator { denominator: f64 },

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, message: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            message: message.into(),
        }
    }

    /// True for errors caused by bad user input (CLI exit code 1), as opposed
    /// to runtime failures (exit code 2).
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            Error::Config(_) | Error::Parse { .. } | Error::InvalidParameter { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
