//! Seeded training runs: the act/store/learn/sync loop, scheduled greedy
//! evaluations, append-only metrics, and checkpointing.

use crate::catch::CatchEnv;
use crate::chain::ChainMdp;
use crate::config::{EnvConfig, RunConfig};
use crate::env::{Env, FrameStack};
use crate::error::{HarnessError, Result};
use autodiff_net::{count_parameters, expected_q, Network};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rl_agent::{select_action, Agent};
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;
use std::io::Write;
use std::path::Path;
use std::time::Instant;
use tensor_core::rng::derive_seed;
use tensor_core::DenseTensor;

/// Greedy-evaluation exploration floor, to avoid limit-cycle lockups.
pub const EVAL_EPSILON: f64 = 0.001;

/// Locked column order of the metrics CSV.
pub const METRICS_HEADER: &str = "step,episode,return,length,mean_loss,epsilon,beta,elapsed_s";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub step: usize,
    pub episode: usize,
    pub ret: f64,
    pub length: usize,
    pub mean_loss: f64,
    pub epsilon: f64,
    pub beta: f64,
    pub elapsed_s: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalRecord {
    pub step: usize,
    pub mean: f64,
    pub stddev: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunSummary {
    pub variant: String,
    pub env: String,
    pub seed: u64,
    pub params_total: usize,
    pub head_params: usize,
    pub head_dense_params: usize,
    pub head_compression_ratio: f64,
    /// Mean of the final three scheduled evaluations.
    pub headline: f64,
    pub evals: Vec<EvalRecord>,
    pub episodes: usize,
    pub total_steps: usize,
    /// First step at which the trailing-20-episode mean return reached 0.5.
    pub steps_to_half_return: Option<usize>,
}

pub fn build_env(cfg: &EnvConfig, seed: u64) -> Result<Box<dyn Env>> {
    match cfg {
        EnvConfig::Catch { grid, frame_stack } => Ok(Box::new(FrameStack::new(
            CatchEnv::new(*grid, seed),
            *frame_stack,
        ))),
        EnvConfig::Chain { k, horizon } => Ok(Box::new(ChainMdp::new(*k, *horizon))),
        EnvConfig::Static { .. } => Err(HarnessError::Config(
            "env: `static` has no dynamics and cannot be trained or evaluated".into(),
        )),
    }
}

fn greedy_q_row(net: &Network, obs_features: &DenseTensor) -> Result<Vec<f64>> {
    let mut shape = vec![1usize];
    shape.extend_from_slice(obs_features.shape());
    let batch = DenseTensor::from_vec(shape, obs_features.data().to_vec())?;
    let (out, _) = net.forward_features(&batch)?;
    let q = match net.support() {
        None => out,
        Some(support) => expected_q(&out, &support)?,
    };
    Ok(q.data().to_vec())
}

/// Runs `episodes` near-greedy episodes and returns (mean, population
/// stddev) of the episode returns.
pub fn evaluate_net(
    net: &Network,
    env_cfg: &EnvConfig,
    episodes: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    if episodes == 0 {
        return Err(HarnessError::Config("eval: episodes must be >= 1".into()));
    }
    let mut env = build_env(env_cfg, derive_seed(seed, 21))?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 22));
    let mut returns = Vec::with_capacity(episodes);
    for _ in 0..episodes {
        let mut obs = net.preprocess(&env.reset())?;
        let mut total = 0.0;
        loop {
            let q = greedy_q_row(net, &obs)?;
            let action = select_action(&q, EVAL_EPSILON, &mut rng);
            let step = env.step(action);
            total += step.reward;
            if step.done || step.truncated {
                break;
            }
            obs = net.preprocess(&step.observation)?;
        }
        returns.push(total);
    }
    let mean = returns.iter().sum::<f64>() / episodes as f64;
    let var = returns.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / episodes as f64;
    Ok((mean, var.sqrt()))
}

/// Evaluates the checkpoint saved by a finished run directory.
pub fn evaluate_run_dir(run_dir: &Path, episodes: usize, seed: u64) -> Result<(f64, f64)> {
    let cfg = RunConfig::load(run_dir.join("config.json"))?;
    let net = autodiff_net::load_checkpoint(run_dir.join("checkpoint"))?;
    evaluate_net(&net, &cfg.env, episodes, seed)
}

/// One seeded training run, steppable so runs can interleave in one
/// process without sharing any state.
pub struct TrainLoop {
    pub config: RunConfig,
    pub agent: Agent,
    env: Box<dyn Env>,
    seed: u64,
    obs: DenseTensor,
    step: usize,
    episode: usize,
    episode_return: f64,
    episode_len: usize,
    loss_sum: f64,
    loss_count: usize,
    eval_steps: Vec<usize>,
    records: Vec<EpisodeRecord>,
    evals: Vec<EvalRecord>,
    trailing: VecDeque<f64>,
    steps_to_half: Option<usize>,
    started: Instant,
}

impl TrainLoop {
    pub fn new(config: RunConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut env = build_env(&config.env, derive_seed(seed, 1))?;
        let net = Network::build(
            &config.network,
            &config.env.obs_shape(),
            config.env.num_actions(),
            derive_seed(seed, 2),
        )?;
        let agent = Agent::new(
            net,
            config.agent_config(),
            config.optim.to_optim_config(),
            seed,
        )?;
        let raw = env.reset();
        let obs = agent.online.preprocess(&raw)?;
        let total = config.run.total_steps;
        let mut eval_steps: Vec<usize> = config
            .run
            .eval_points
            .iter()
            .map(|p| ((p * total as f64).round() as usize).clamp(1, total))
            .collect();
        eval_steps.sort_unstable();
        eval_steps.dedup();
        Ok(Self {
            config,
            agent,
            env,
            seed,
            obs,
            step: 0,
            episode: 0,
            episode_return: 0.0,
            episode_len: 0,
            loss_sum: 0.0,
            loss_count: 0,
            eval_steps,
            records: Vec::new(),
            evals: Vec::new(),
            trailing: VecDeque::with_capacity(20),
            steps_to_half: None,
            started: Instant::now(),
        })
    }

    pub fn done(&self) -> bool {
        self.step >= self.config.run.total_steps
    }

    pub fn records(&self) -> &[EpisodeRecord] {
        &self.records
    }

    pub fn evals(&self) -> &[EvalRecord] {
        &self.evals
    }

    /// Advances one environment step (act, store, learn, sync, maybe eval).
    pub fn step(&mut self) -> Result<()> {
        debug_assert!(!self.done());
        let epsilon = self.agent.epsilon();
        let beta = self.agent.beta();
        let action = self.agent.act(&self.obs)?;
        let step = self.env.step(action);
        let next_obs = self.agent.online.preprocess(&step.observation)?;
        self.agent
            .observe(&self.obs, action, step.reward, &next_obs, step.done, step.truncated);
        if let Some(loss) = self.agent.try_learn()? {
            self.loss_sum += loss;
            self.loss_count += 1;
        }
        self.step += 1;
        self.episode_return += step.reward;
        self.episode_len += 1;

        if step.done || step.truncated {
            let mean_loss = if self.loss_count > 0 {
                self.loss_sum / self.loss_count as f64
            } else {
                0.0
            };
            let elapsed_s = if self.config.run.record_wall_time {
                self.started.elapsed().as_secs_f64()
            } else {
                0.0
            };
            self.records.push(EpisodeRecord {
                step: self.step,
                episode: self.episode,
                ret: self.episode_return,
                length: self.episode_len,
                mean_loss,
                epsilon,
                beta,
                elapsed_s,
            });
            if self.trailing.len() == 20 {
                self.trailing.pop_front();
            }
            self.trailing.push_back(self.episode_return);
            if self.steps_to_half.is_none() && self.trailing.len() == 20 {
                let mean: f64 = self.trailing.iter().sum::<f64>() / 20.0;
                if mean >= 0.5 {
                    self.steps_to_half = Some(self.step);
                }
            }
            self.episode += 1;
            self.episode_return = 0.0;
            self.episode_len = 0;
            self.loss_sum = 0.0;
            self.loss_count = 0;
            let raw = self.env.reset();
            self.obs = self.agent.online.preprocess(&raw)?;
        } else {
            self.obs = next_obs;
        }

        if let Ok(idx) = self.eval_steps.binary_search(&self.step) {
            let (mean, stddev) = evaluate_net(
                &self.agent.online,
                &self.config.env,
                self.config.run.eval_episodes,
                derive_seed(self.seed, 1000 + idx as u64),
            )?;
            self.evals.push(EvalRecord {
                step: self.step,
                mean,
                stddev,
            });
        }
        Ok(())
    }

    pub fn run_to_completion(&mut self) -> Result<()> {
        while !self.done() {
            self.step()?;
        }
        Ok(())
    }

    /// Summary of a finished loop, without touching the filesystem.
    pub fn summary(&self) -> RunSummary {
        let report = count_parameters(
            &self.config.network,
            &self.config.env.obs_shape(),
            self.config.env.num_actions(),
        )
        .expect("validated at construction");
        let last3 = &self.evals[self.evals.len().saturating_sub(3)..];
        let headline = if last3.is_empty() {
            f64::NAN
        } else {
            last3.iter().map(|e| e.mean).sum::<f64>() / last3.len() as f64
        };
        RunSummary {
            variant: self.config.run.variant.clone(),
            env: self.config.env.label().to_string(),
            seed: self.seed,
            params_total: report.total,
            head_params: report.linear_total,
            head_dense_params: report.dense_equivalent_linear_total,
            head_compression_ratio: report.linear_compression_ratio(),
            headline,
            evals: self.evals.clone(),
            episodes: self.episode,
            total_steps: self.config.run.total_steps,
            steps_to_half_return: self.steps_to_half,
        }
    }

    /// Writes metrics.csv, summary.json, config.json, and the checkpoint
    /// under `out_dir`, then returns the summary.
    pub fn finish(&self, out_dir: &Path) -> Result<RunSummary> {
        std::fs::create_dir_all(out_dir)?;
        write_metrics_csv(&out_dir.join("metrics.csv"), &self.records)?;
        let summary = self.summary();
        std::fs::write(
            out_dir.join("summary.json"),
            serde_json::to_string_pretty(&summary)?,
        )?;
        std::fs::write(
            out_dir.join("config.json"),
            serde_json::to_string_pretty(&self.config)?,
        )?;
        autodiff_net::save_checkpoint(out_dir.join("checkpoint"), &self.agent.online)?;
        Ok(summary)
    }
}

/// Full training run: loop to completion and persist everything.
pub fn train_run(config: &RunConfig, seed: u64, out_dir: &Path) -> Result<RunSummary> {
    let mut train = TrainLoop::new(config.clone(), seed)?;
    train.run_to_completion()?;
    train.finish(out_dir)
}

pub fn write_metrics_csv(path: &Path, records: &[EpisodeRecord]) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "{METRICS_HEADER}")?;
    for r in records {
        writeln!(
            f,
            "{},{},{},{},{},{},{},{}",
            r.step, r.episode, r.ret, r.length, r.mean_loss, r.epsilon, r.beta, r.elapsed_s
        )?;
    }
    f.flush()?;
    Ok(())
}
