//! Prioritized double/dueling/distributional deep Q-learning over the
//! autodiff layer zoo: n-step transitions, proportional replay on a sum
//! tree, double-Q and categorical targets, and the learning loop glue.

mod agent;
mod error;
mod replay;
mod targets;
mod transition;

pub use agent::{select_action, Agent, AgentConfig};
pub use error::{AgentError, Result};
pub use replay::{SampleBatch, SumTreeBuffer};
pub use targets::{
    argmax_lowest, bellman_loss, check_mass, distributional_loss, double_q_target,
    project_distribution, LossKind, TargetInput,
};
pub use transition::{obs_to_tensor, obs_to_vec32, NStepAccumulator, Transition};
