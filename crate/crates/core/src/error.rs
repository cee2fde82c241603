use thiserror::Error;

/// Errors produced by the numerical routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix has no entries")]
    EmptyMatrix,

    #[error("non-finite entry at ({row}, {col})")]
    NonFiniteEntry { row: usize, col: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: String, found: String },

    #[error("dense {n}x{n} cross-leverage matrix exceeds the cap of {cap} rows")]
    MatrixTooLargeForDenseGram { n: usize, cap: usize },

    #[error("length {0} is not a power of two")]
    NotPowerOfTwo(usize),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// The sketched matrix lost rank; a different seed usually fixes it.
    #[error("rank deficient: numerical rank {rank} < required {required}")]
    RankDeficient { rank: usize, required: usize },

    #[error("shape error: {0}")]
    ShapeError(String),

    #[error("matrix is zero; heavy-pair threshold is degenerate")]
    ZeroMatrix,

    #[error("kappa must be finite and > 1, got {0}")]
    InvalidKappa(f64),

    #[error("rank {rank} is too low for target rank k = {k}")]
    RankTooLow { rank: usize, k: usize },
}

impl Error {
    /// Whether rerunning with a different seed may succeed.
    pub fn is_retryable(&self) -> bool {
        matches!(self, Error::RankDeficient { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
