use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("singular configuration: {0}")]
    Singular(String),

    #[error("quadrature did not converge: estimated error {estimate:e} exceeds tolerance {tolerance:e}")]
    Convergence { estimate: f64, tolerance: f64 },

    #[error("rank-deficient sample set: {0}")]
    RankDeficient(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("state has no finite temperature: {0}")]
    NoTemperature(String),

    #[error("temperature extraction failed: {0}")]
    ExtractionFailed(String),

    #[error("solver failure: {message} (best residual {residual:e})")]
    Solver { message: String, residual: f64 },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
