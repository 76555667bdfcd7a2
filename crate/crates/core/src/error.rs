use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("invalid dimensions: {0}")]
    InvalidDimensions(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A dense computation would exceed the configured size guard.
    #[error("problem too large: dimension {dim} exceeds limit {limit}; {hint}")]
    TooLarge {
        dim: usize,
        limit: usize,
        hint: &'static str,
    },

    /// A randomized construction did not produce a verified output.
    #[error("construction failed after {attempts} attempts: {diagnostics}")]
    ConstructionFailed { attempts: usize, diagnostics: String },

    /// A solver produced a non-finite iterate. Carries the last finite state.
    #[error("numerical failure at iteration {iteration} (last finite objective {last_objective})")]
    NumericalFailure {
        iteration: usize,
        last_objective: f64,
        n: usize,
        p: usize,
        last_point: Vec<f64>,
    },

    #[error("i/o error: {0}")]
    Io(String),

    #[error("parse error: {0}")]
    Parse(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn dims(msg: impl Into<String>) -> Error {
    Error::InvalidDimensions(msg.into())
}
