use thiserror::Error;

/// Errors raised by tensor and matrix operations.
#[derive(Debug, Error)]
pub enum TensorError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("mode {mode} out of range for tensor with {modes} modes")]
    ModeOutOfRange { mode: usize, modes: usize },

    #[error("invalid shape: {0}")]
    InvalidShape(String),

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("bad tensor file: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, TensorError>;
