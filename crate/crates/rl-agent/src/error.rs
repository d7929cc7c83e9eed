use thiserror::Error;

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("replay buffer holds {len} transitions, need {need}")]
    NotEnoughSamples { len: usize, need: usize },

    #[error("invalid agent config: {0}")]
    Config(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error(transparent)]
    Net(#[from] autodiff_net::NetError),

    #[error(transparent)]
    Optim(#[from] kfac_optim::OptimError),

    #[error(transparent)]
    Tensor(#[from] tensor_core::TensorError),
}

pub type Result<T> = std::result::Result<T, AgentError>;
