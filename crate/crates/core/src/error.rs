//! Error types shared across the crate.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Dimension or index mismatch between inputs.
    #[error("shape error: {0}")]
    Shape(String),

    /// Input outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// The requested combination is not supported by this operation.
    #[error("capability error: {0}")]
    Capability(String),

    /// A series cap was reached before the tail bound met the tolerance.
    #[error("truncation failure: achieved bound {achieved:e} above tolerance {tolerance:e}")]
    Truncation { achieved: f64, tolerance: f64 },

    /// Quadrature or series evaluation failed to converge.
    #[error("numeric error: {0}")]
    Numeric(String),

    /// A Monte Carlo replication hit a loss domain error.
    #[error("replication {rep}: {source}")]
    Replication {
        rep: u64,
        #[source]
        source: Box<Error>,
    },

    /// Bad experiment configuration.
    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("config parse error: {0}")]
    Json(#[from] serde_json::Error),
}
