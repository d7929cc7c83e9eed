use thiserror::Error;

#[derive(Debug, Error)]
pub enum NetError {
    #[error("shape mismatch at {site}: {detail}")]
    Shape { site: String, detail: String },

    #[error("invalid network spec: {0}")]
    Spec(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Tensor(#[from] tensor_core::TensorError),

    #[error(transparent)]
    Decomp(#[from] decomp::DecompError),

    #[error(transparent)]
    Scattering(#[from] scattering::ScatteringError),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, NetError>;

pub(crate) fn shape_err(site: &str, detail: impl Into<String>) -> NetError {
    NetError::Shape {
        site: site.to_string(),
        detail: detail.into(),
    }
}
