use thiserror::Error;

/// Errors produced by estimation, metrics, and I/O routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {context}")]
    DimensionMismatch { context: String },

    #[error("non-finite value in {matrix} at row {row}, col {col}")]
    NonFiniteValue {
        matrix: &'static str,
        row: usize,
        col: usize,
    },

    #[error("degenerate data: {context}")]
    DegenerateData { context: String },

    #[error("rank {rank} too large for a {n1}x{n2} problem")]
    RankTooLarge { rank: usize, n1: usize, n2: usize },

    #[error("sparsity budget out of range: {context}")]
    BudgetOutOfRange { context: String },

    #[error("matrix is not orthonormal: gram deviation {deviation:.3e} exceeds {tolerance:.3e}")]
    NotOrthonormal { deviation: f64, tolerance: f64 },

    #[error("non-positive value at index {index}: log-log fitting requires positive data")]
    NonPositiveValue { index: usize },

    #[error("positives set is empty")]
    EmptyPositives,

    #[error("index ({i}, {j}) out of range for ({rows}, {cols}) entities")]
    IndexOutOfRange {
        i: usize,
        j: usize,
        rows: usize,
        cols: usize,
    },

    #[error("too few samples: need at least {needed}, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("parse error: {context}")]
    Parse { context: String },
}

impl Error {
    pub(crate) fn dims(context: impl Into<String>) -> Self {
        Error::DimensionMismatch {
            context: context.into(),
        }
    }

    /// True for errors caused by invalid inputs rather than numerical failure.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::DimensionMismatch { .. }
                | Error::NonFiniteValue { .. }
                | Error::RankTooLarge { .. }
                | Error::BudgetOutOfRange { .. }
                | Error::NonPositiveValue { .. }
                | Error::EmptyPositives
                | Error::IndexOutOfRange { .. }
                | Error::TooFewSamples { .. }
                | Error::Parse { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
