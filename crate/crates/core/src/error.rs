use std::path::PathBuf;

use thiserror::Error;

use crate::trajectory::Trajectory;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A scalar argument was NaN or infinite where a finite value is required.
    #[error("non-finite {what}: {value}")]
    NonFinite { what: &'static str, value: f64 },

    #[error("dimension mismatch for {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    /// The point lies outside the barrier domain, i.e. `phi(u, x) - gamma >= 0`.
    #[error("point outside the barrier domain (phi - gamma = {phi_minus_gamma})")]
    Infeasible { phi_minus_gamma: f64 },

    /// Cholesky factorization of a matrix that should be positive definite failed.
    #[error("{what} is not positive definite")]
    NotPositiveDefinite { what: &'static str },

    #[error("invalid {field}: {reason}")]
    Validation { field: String, reason: String },

    #[error("integration failed at t = {t}: {reason}")]
    Integration {
        t: f64,
        reason: String,
        last_state: Vec<f64>,
    },

    #[error("oracle failed: {0}")]
    Oracle(String),

    #[error("config parse error: {0}")]
    Parse(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error for {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    /// A run stopped early; the samples recorded before the failure are attached.
    #[error("run failed: {source}")]
    RunFailed {
        #[source]
        source: Box<Error>,
        partial: Box<Trajectory>,
    },
}

impl Error {
    pub(crate) fn validation(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Validation {
            field: field.into(),
            reason: reason.into(),
        }
    }

    /// True for errors caused by bad input (configs, arguments), as opposed to
    /// failures of the numerical machinery.
    pub fn is_validation(&self) -> bool {
        match self {
            Error::Validation { .. } | Error::Parse(_) | Error::DimensionMismatch { .. } => true,
            Error::NonFinite { .. } | Error::Io { .. } | Error::Csv { .. } => true,
            Error::RunFailed { source, .. } => source.is_validation(),
            _ => false,
        }
    }
}

pub(crate) fn ensure_finite(what: &'static str, value: f64) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::NonFinite { what, value })
    }
}

pub(crate) fn ensure_len(what: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            what,
            expected,
            got,
        })
    }
}
