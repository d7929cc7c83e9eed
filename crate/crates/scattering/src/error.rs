use thiserror::Error;

#[derive(Debug, Error)]
pub enum ScatteringError {
    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("input shape {got:?} does not match configured {expected:?}")]
    InputShape { expected: Vec<usize>, got: Vec<usize> },

    #[error("size mismatch: {0}")]
    SizeMismatch(String),

    #[error(transparent)]
    Tensor(#[from] tensor_core::TensorError),
}

pub type Result<T> = std::result::Result<T, ScatteringError>;
