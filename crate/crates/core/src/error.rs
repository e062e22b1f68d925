use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Validation(String),

    #[error("point {x} outside the domain [0, 1]")]
    Domain { x: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// Cholesky failed on every rung of the jitter ladder.
    #[error("covariance matrix of size {n} is not numerically positive definite (jitter ladder tried: {ladder:?})")]
    Conditioning { n: usize, ladder: Vec<f64> },

    #[error("no feasible draw after {tries} tries (empirical acceptance rate {acceptance_rate:.3e}); constraint set may have zero probability")]
    InfeasibleSuspected { tries: usize, acceptance_rate: f64 },

    #[error("could not find a feasible starting point for the Gibbs sampler")]
    Initialization,

    #[error("estimation failed: {0}")]
    EstimationFailed(String),

    #[error("experiment failed: {0}")]
    ExperimentFailed(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures of the numerical machinery as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Conditioning { .. }
                | Error::InfeasibleSuspected { .. }
                | Error::Initialization
                | Error::EstimationFailed(_)
                | Error::ExperimentFailed(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
