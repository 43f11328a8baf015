use thiserror::Error;

/// Errors produced by the kernel machines in this crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite value in input")]
    NonFiniteInput,

    #[error("matrix is not symmetric at ({row}, {col})")]
    NotSymmetric { row: usize, col: usize },

    #[error("matrix is not positive definite (last jitter tried: {jitter:e})")]
    NotPositiveDefinite { jitter: f64 },

    #[error("derivative order must be at least 1, got {0}")]
    InvalidOrder(usize),

    #[error("rank {rank} outside 1..={max}")]
    InvalidRank { rank: usize, max: usize },

    #[error("training labels contain a single class")]
    SingleClassInput,

    #[error("sample count mismatch: {0} vs {1}")]
    SampleCountMismatch(usize, usize),

    #[error("backtracking line search collapsed on the first iteration")]
    StepCollapse,

    #[error("unknown dataset `{0}`")]
    UnknownDataset(String),

    #[error("empty input")]
    EmptyInput,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn ensure_finite<'a>(values: impl IntoIterator<Item = &'a f64>) -> Result<()> {
    if values.into_iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFiniteInput)
    }
}

pub(crate) fn ensure_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}
