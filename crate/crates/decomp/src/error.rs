use thiserror::Error;

#[derive(Debug, Error)]
pub enum DecompError {
    #[error("rank must be at least 1")]
    ZeroRank,

    #[error("rank {rank} exceeds extent {extent} at mode {mode}")]
    RankExceedsExtent {
        mode: usize,
        rank: usize,
        extent: usize,
    },

    #[error("need {expected} ranks for a tensor with {expected} modes, got {got}")]
    RankCountMismatch { expected: usize, got: usize },

    #[error("tensor must have at least 2 modes, got {0}")]
    TooFewModes(usize),

    #[error("invalid decomposition: {0}")]
    Invalid(String),

    #[error(transparent)]
    Tensor(#[from] tensor_core::TensorError),
}

pub type Result<T> = std::result::Result<T, DecompError>;
