//! Run configuration: a JSON file with documented sections. Unknown keys
//! are rejected so typos in rank presets fail loudly.

use crate::error::{HarnessError, Result};
use autodiff_net::NetworkSpec;
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, rename_all = "snake_case", tag = "name")]
pub enum EnvConfig {
    Catch {
        #[serde(default = "default_grid")]
        grid: usize,
        #[serde(default = "default_frame_stack")]
        frame_stack: usize,
    },
    Chain {
        #[serde(default = "default_chain_k")]
        k: usize,
        #[serde(default = "default_chain_horizon")]
        horizon: usize,
    },
    /// Fixed observation/action sizes with no dynamics; usable by
    /// `count-params` but not trainable.
    Static { obs_shape: Vec<usize>, actions: usize },
}

fn default_grid() -> usize {
    24
}
fn default_frame_stack() -> usize {
    2
}
fn default_chain_k() -> usize {
    8
}
fn default_chain_horizon() -> usize {
    200
}

impl EnvConfig {
    pub fn obs_shape(&self) -> Vec<usize> {
        match self {
            EnvConfig::Catch { grid, frame_stack } => vec![*frame_stack, *grid, *grid],
            EnvConfig::Chain { k, .. } => vec![*k],
            EnvConfig::Static { obs_shape, .. } => obs_shape.clone(),
        }
    }

    pub fn num_actions(&self) -> usize {
        match self {
            EnvConfig::Catch { .. } => crate::catch::CATCH_ACTIONS,
            EnvConfig::Chain { .. } => crate::chain::CHAIN_ACTIONS,
            EnvConfig::Static { actions, .. } => *actions,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            EnvConfig::Catch { .. } => "catch",
            EnvConfig::Chain { .. } => "chain",
            EnvConfig::Static { .. } => "static",
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum LossChoice {
    Squared,
    ClampedQuadratic,
}

impl From<LossChoice> for rl_agent::LossKind {
    fn from(c: LossChoice) -> Self {
        match c {
            LossChoice::Squared => rl_agent::LossKind::Squared,
            LossChoice::ClampedQuadratic => rl_agent::LossKind::ClampedQuadratic,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct AgentSection {
    pub gamma: f64,
    pub n_step: usize,
    pub batch_size: usize,
    pub target_sync_period: usize,
    pub min_replay: usize,
    pub replay_capacity: usize,
    pub learn_period: usize,
    pub eps_start: f64,
    pub eps_end: f64,
    pub eps_fraction: f64,
    pub beta_start: f64,
    pub beta_end: f64,
    pub priority_alpha: f64,
    pub priority_eps: f64,
    pub loss: LossChoice,
}

impl Default for AgentSection {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            n_step: 20,
            batch_size: 32,
            target_sync_period: 2000,
            min_replay: 1600,
            replay_capacity: 25_000,
            learn_period: 1,
            eps_start: 1.0,
            eps_end: 0.01,
            eps_fraction: 0.1,
            beta_start: 0.4,
            beta_end: 1.0,
            priority_alpha: 0.5,
            priority_eps: 1e-6,
            loss: LossChoice::Squared,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum AssignmentChoice {
    Adam,
    Kfac,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct OptimSection {
    pub assignment: AssignmentChoice,
    pub lr: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub kfac_lr: f64,
    pub kfac_damping: f64,
    pub kfac_stat_decay: f64,
    pub kfac_update_period: usize,
    pub max_grad_norm: f64,
}

impl Default for OptimSection {
    fn default() -> Self {
        Self {
            assignment: AssignmentChoice::Adam,
            lr: 1e-4,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1.5e-4,
            kfac_lr: 1e-3,
            kfac_damping: 0.1,
            kfac_stat_decay: 0.95,
            kfac_update_period: 100,
            max_grad_norm: 10.0,
        }
    }
}

impl OptimSection {
    pub fn to_optim_config(&self) -> kfac_optim::OptimConfig {
        kfac_optim::OptimConfig {
            assignment: match self.assignment {
                AssignmentChoice::Adam => kfac_optim::Assignment::Adam,
                AssignmentChoice::Kfac => kfac_optim::Assignment::Kfac,
            },
            adam: kfac_optim::AdamConfig {
                lr: self.lr,
                beta1: self.adam_beta1,
                beta2: self.adam_beta2,
                eps: self.adam_eps,
            },
            kfac: kfac_optim::KfacConfig {
                damping: self.kfac_damping,
                stat_decay: self.kfac_stat_decay,
                update_period: self.kfac_update_period,
                min_eig: 1e-10,
            },
            kfac_lr: self.kfac_lr,
            max_grad_norm: Some(self.max_grad_norm),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    pub total_steps: usize,
    pub eval_episodes: usize,
    /// Fractions of `total_steps` at which greedy evaluations run; the
    /// headline score is the mean of the final three.
    pub eval_points: Vec<f64>,
    /// Wall-clock timing in the metrics CSV is opt-in: identical seeds must
    /// produce byte-identical CSVs by default.
    pub record_wall_time: bool,
    /// Variant label used by the compression report (e.g. "dense",
    /// "trl-5x").
    pub variant: String,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            total_steps: 30_000,
            eval_episodes: 100,
            eval_points: vec![0.8, 0.9, 1.0],
            record_wall_time: false,
            variant: "unnamed".to_string(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub env: EnvConfig,
    pub network: NetworkSpec,
    #[serde(default)]
    pub agent: AgentSection,
    #[serde(default)]
    pub optim: OptimSection,
    #[serde(default)]
    pub run: RunSection,
}

impl RunConfig {
    pub fn from_json(raw: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(raw)
            .map_err(|e| HarnessError::Config(format!("{e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let raw = std::fs::read_to_string(&path).map_err(|e| {
            HarnessError::Config(format!("cannot read {}: {e}", path.as_ref().display()))
        })?;
        Self::from_json(&raw)
    }

    pub fn validate(&self) -> Result<()> {
        let field = |name: &str, msg: String| HarnessError::Config(format!("{name}: {msg}"));
        if !(0.0..=1.0).contains(&self.agent.gamma) {
            return Err(field("agent.gamma", format!("{} not in [0, 1]", self.agent.gamma)));
        }
        if self.agent.batch_size == 0 || self.agent.batch_size > self.agent.min_replay {
            return Err(field(
                "agent.batch_size",
                format!(
                    "{} must be in 1..=agent.min_replay ({})",
                    self.agent.batch_size, self.agent.min_replay
                ),
            ));
        }
        if self.agent.min_replay > self.agent.replay_capacity {
            return Err(field(
                "agent.min_replay",
                format!("{} exceeds agent.replay_capacity", self.agent.min_replay),
            ));
        }
        if self.run.total_steps == 0 {
            return Err(field("run.total_steps", "must be >= 1".into()));
        }
        if self.run.eval_points.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
            return Err(field("run.eval_points", "fractions must lie in [0, 1]".into()));
        }
        match &self.env {
            EnvConfig::Catch { grid, frame_stack } => {
                if *grid < 3 || *frame_stack == 0 {
                    return Err(field("env", "catch needs grid >= 3 and frame_stack >= 1".into()));
                }
            }
            EnvConfig::Chain { k, horizon } => {
                if *k < 2 || *horizon == 0 {
                    return Err(field("env", "chain needs k >= 2 and horizon >= 1".into()));
                }
            }
            EnvConfig::Static { obs_shape, actions } => {
                if obs_shape.is_empty() || *actions == 0 {
                    return Err(field("env", "static needs a shape and actions".into()));
                }
            }
        }
        // the network must build against the env shapes
        autodiff_net::infer_shapes(&self.network, &self.env.obs_shape())
            .map_err(|e| field("network", format!("{e}")))?;
        Ok(())
    }

    pub fn agent_config(&self) -> rl_agent::AgentConfig {
        rl_agent::AgentConfig {
            gamma: self.agent.gamma,
            n_step: self.agent.n_step,
            batch_size: self.agent.batch_size,
            target_sync_period: self.agent.target_sync_period,
            min_replay: self.agent.min_replay,
            replay_capacity: self.agent.replay_capacity,
            learn_period: self.agent.learn_period,
            eps_start: self.agent.eps_start,
            eps_end: self.agent.eps_end,
            eps_fraction: self.agent.eps_fraction,
            beta_start: self.agent.beta_start,
            beta_end: self.agent.beta_end,
            priority_alpha: self.agent.priority_alpha,
            priority_eps: self.agent.priority_eps,
            loss: self.agent.loss.into(),
            total_steps: self.run.total_steps,
        }
    }
}
