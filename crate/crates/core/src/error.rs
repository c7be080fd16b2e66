use std::path::PathBuf;

use thiserror::Error;

use crate::scheduler::Violation;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("torus side must be at least 3, got {0}")]
    InvalidGrid(usize),

    #[error("invalid model parameters: {0}")]
    InvalidParams(String),

    #[error("invalid configuration: {0}")]
    InvalidConfiguration(String),

    #[error("invalid run configuration: {}", .0.join("; "))]
    InvalidRunConfig(Vec<String>),

    #[error("invalid scheduler: {}", join_violations(.0))]
    InvalidScheduler(Vec<Violation>),

    #[error("parse error in {path}:{line}: {message}")]
    Parse { path: PathBuf, line: usize, message: String },

    #[error("instance too large: {what} is {actual}, limit {limit}")]
    TooLarge { what: &'static str, actual: usize, limit: usize },

    #[error("stationary solve did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("state {0} cannot reach the root")]
    Unreachable(usize),

    #[error("cross-check mismatch: {0}")]
    Mismatch(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io { path: path.into(), source }
    }

    /// True for errors caused by bad input rather than by a computation.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidGrid(_)
                | Error::InvalidParams(_)
                | Error::InvalidConfiguration(_)
                | Error::InvalidRunConfig(_)
                | Error::InvalidScheduler(_)
                | Error::Parse { .. }
        )
    }
}

fn join_violations(v: &[Violation]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}
