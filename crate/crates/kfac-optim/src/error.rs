use thiserror::Error;

#[derive(Debug, Error)]
pub enum OptimError {
    #[error("singular curvature factor: {0}")]
    SingularFactor(String),

    #[error("dimension mismatch: {0}")]
    DimMismatch(String),

    #[error(transparent)]
    Tensor(#[from] tensor_core::TensorError),

    #[error(transparent)]
    Net(#[from] autodiff_net::NetError),
}

pub type Result<T> = std::result::Result<T, OptimError>;
