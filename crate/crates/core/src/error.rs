use thiserror::Error;

/// Errors produced by the estimation library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix is not positive semidefinite (min eigenvalue {min_eigenvalue:e})")]
    NotPsd { min_eigenvalue: f64 },

    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("gamma = {gamma} is outside the domain (must exceed {bound})")]
    OutOfDomain { gamma: f64, bound: f64 },

    #[error("gradient matrix has a negative eigenvalue {min_eigenvalue:e}")]
    InvalidGradient { min_eigenvalue: f64 },

    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),

    #[error("intercept is not centered at the nominal means (deviation {deviation:e})")]
    UncenteredIntercept { deviation: f64 },

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn dim_mismatch(what: &str, expected: usize, got: usize) -> Error {
    Error::DimensionMismatch(format!("{what}: expected {expected}, got {got}"))
}
