use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("run error: {0}")]
    Run(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Tensor(#[from] tensor_core::TensorError),

    #[error(transparent)]
    Decomp(#[from] decomp::DecompError),

    #[error(transparent)]
    Scattering(#[from] scattering::ScatteringError),

    #[error(transparent)]
    Net(#[from] autodiff_net::NetError),

    #[error(transparent)]
    Optim(#[from] kfac_optim::OptimError),

    #[error(transparent)]
    Agent(#[from] rl_agent::AgentError),
}

impl HarnessError {
    /// CLI exit code: 1 for config problems, 2 for runtime numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Numerical(_) => 2,
            HarnessError::Agent(rl_agent::AgentError::Numerical(_)) => 2,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, HarnessError>;
