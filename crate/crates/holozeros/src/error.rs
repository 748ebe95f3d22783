use thiserror::Error;

/// Errors raised by the numerical routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("Im(tau) must be positive, got {0}")]
    BadTau(f64),

    #[error("Gram matrix is not positive definite ({0}); increase the quadrature resolution or enlarge the support")]
    DegenerateGram(String),

    #[error("zero finder failed: {0}")]
    ZeroFinder(String),

    #[error("configuration violates the Abel constraint by {0:.3e}")]
    AbelConstraint(f64),

    #[error("ill-conditioned configuration: {0}")]
    IllConditioned(String),

    #[error("solver did not converge: {0}")]
    NoConvergence(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
