use thiserror::Error;

use crate::solver::IterationRecord;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Adaptive quadrature ran out of subdivisions. `estimate` is the best value reached.
    #[error("quadrature did not converge after {subdivisions} subdivisions (estimate {estimate}, error {error})")]
    Convergence {
        estimate: f64,
        error: f64,
        subdivisions: usize,
    },

    /// A b-function violates one of its structural invariants.
    #[error("invalid b-function: {0}")]
    InvalidBFunction(String),

    #[error("solver failed: {message}")]
    Solver {
        message: String,
        log: Vec<IterationRecord>,
    },

    #[error("configuration error: {0}")]
    Configuration(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    /// Short machine-readable tag used in CLI error records.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Domain(_) => "domain",
            Error::Convergence { .. } => "convergence",
            Error::InvalidBFunction(_) => "invalid_bfunction",
            Error::Solver { .. } => "solver",
            Error::Configuration(_) => "configuration",
            Error::Json(_) => "json",
        }
    }
}
