use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("size overflow: {0}")]
    Overflow(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("zero pivot in incomplete factorization at row {row} (pivot = {pivot:e})")]
    ZeroPivot { row: usize, pivot: f64 },

    #[error("singular matrix in direct factorization at column {column}")]
    Singular { column: usize },

    #[error("eigensolver failure: {0}")]
    Eigen(String),

    #[error("variant {variant} requires {requirement}")]
    VariantMismatch {
        variant: &'static str,
        requirement: &'static str,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
