use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unit index {index} out of range for {len} units")]
    Index { index: usize, len: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("degenerate state: units {first} and {second} coincide")]
    Degenerate { first: usize, second: usize },

    #[error("usage: {0}")]
    Usage(String),

    #[error("singular linear system: {0}")]
    Singular(String),

    #[error("{what} did not converge (best residual {residual:e})")]
    NoConvergence { what: &'static str, residual: f64 },

    #[error("integration failed: {0}")]
    Integration(String),

    #[error("ingestion error at row {row}, column {column}: {message}")]
    Ingest {
        row: usize,
        column: String,
        message: String,
    },

    #[error("empty data: {0}")]
    Empty(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
