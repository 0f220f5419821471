use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid window: {0}")]
    InvalidWindow(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("circulant embedding failed: minimum eigenvalue {min_eigenvalue:e} below tolerance {tolerance:e}")]
    EmbeddingFailure { min_eigenvalue: f64, tolerance: f64 },

    #[error("grid of {requested} cells exceeds the configured cap of {cap}")]
    GridTooLarge { requested: usize, cap: usize },

    #[error("realization does not cover the requested region: {0}")]
    Coverage(String),

    #[error("covariance not negligible at truncation radius {radius}: |C| = {boundary:e} vs C(0) = {origin:e}")]
    Truncation { radius: f64, boundary: f64, origin: f64 },

    #[error("quadrature reached error {achieved:e}, requested {requested:e}")]
    QuadratureTolerance { achieved: f64, requested: f64 },

    #[error("invalid theta sequence: {0}")]
    InvalidTheta(String),

    #[error("tail sum: {0}")]
    TailSum(String),

    #[error("bounded-variation function: {0}")]
    BoundedVariation(String),

    #[error("inconsistent covariance matrix: minimum eigenvalue {min_eigenvalue:e} below -{tolerance:e}")]
    IndefiniteMatrix { min_eigenvalue: f64, tolerance: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
