//! The learning agent: epsilon-greedy acting, n-step prioritized replay,
//! double-Q or categorical targets, and hard target-network syncs.

use crate::error::{AgentError, Result};
use crate::replay::SumTreeBuffer;
use crate::targets::{
    argmax_lowest, bellman_loss, distributional_loss, double_q_target, project_distribution,
    LossKind, TargetInput,
};
use crate::transition::{obs_to_vec32, NStepAccumulator, Transition};
use autodiff_net::{expected_q, Network};
use kfac_optim::{Assignment, OptimConfig, Optimizer};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tensor_core::rng::derive_seed;
use tensor_core::DenseTensor;

#[derive(Debug, Clone, Copy)]
pub struct AgentConfig {
    pub gamma: f64,
    pub n_step: usize,
    pub batch_size: usize,
    pub target_sync_period: usize,
    pub min_replay: usize,
    pub replay_capacity: usize,
    /// Learn every this many environment steps.
    pub learn_period: usize,
    pub eps_start: f64,
    pub eps_end: f64,
    /// Fraction of total steps over which epsilon anneals linearly.
    pub eps_fraction: f64,
    pub beta_start: f64,
    pub beta_end: f64,
    pub priority_alpha: f64,
    pub priority_eps: f64,
    pub loss: LossKind,
    /// Length of the schedule horizon (total environment steps).
    pub total_steps: usize,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            n_step: 20,
            batch_size: 32,
            target_sync_period: 2000,
            min_replay: 1600,
            replay_capacity: 100_000,
            learn_period: 1,
            eps_start: 1.0,
            eps_end: 0.01,
            eps_fraction: 0.1,
            beta_start: 0.4,
            beta_end: 1.0,
            priority_alpha: 0.5,
            priority_eps: 1e-6,
            loss: LossKind::Squared,
            total_steps: 100_000,
        }
    }
}

impl AgentConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(AgentError::Config(format!("gamma {} not in [0, 1]", self.gamma)));
        }
        if self.n_step == 0 {
            return Err(AgentError::Config("n_step must be >= 1".into()));
        }
        if self.batch_size == 0 || self.batch_size > self.min_replay {
            return Err(AgentError::Config(format!(
                "batch size {} must be in 1..=min_replay ({})",
                self.batch_size, self.min_replay
            )));
        }
        if self.min_replay > self.replay_capacity {
            return Err(AgentError::Config(format!(
                "min replay {} exceeds capacity {}",
                self.min_replay, self.replay_capacity
            )));
        }
        if self.learn_period == 0 || self.target_sync_period == 0 || self.total_steps == 0 {
            return Err(AgentError::Config("periods must be >= 1".into()));
        }
        Ok(())
    }
}

/// Epsilon-greedy over a q-row with lowest-index tie-break.
pub fn select_action(q_row: &[f64], epsilon: f64, rng: &mut ChaCha8Rng) -> usize {
    if epsilon > 0.0 && rng.gen::<f64>() < epsilon {
        rng.gen_range(0..q_row.len())
    } else {
        argmax_lowest(q_row)
    }
}

pub struct Agent {
    pub online: Network,
    pub target: Network,
    pub config: AgentConfig,
    pub buffer: SumTreeBuffer,
    nstep: NStepAccumulator,
    optimizer: Optimizer,
    rng_action: ChaCha8Rng,
    rng_replay: ChaCha8Rng,
    env_steps: usize,
    updates: usize,
}

impl Agent {
    pub fn new(online: Network, config: AgentConfig, optim: OptimConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let target = online.clone();
        Ok(Self {
            buffer: SumTreeBuffer::new(
                config.replay_capacity,
                config.priority_alpha,
                config.priority_eps,
            ),
            nstep: NStepAccumulator::new(config.n_step, config.gamma),
            optimizer: Optimizer::new(optim),
            rng_action: ChaCha8Rng::seed_from_u64(derive_seed(seed, 10)),
            rng_replay: ChaCha8Rng::seed_from_u64(derive_seed(seed, 11)),
            env_steps: 0,
            updates: 0,
            online,
            target,
            config,
        })
    }

    pub fn env_steps(&self) -> usize {
        self.env_steps
    }

    pub fn updates(&self) -> usize {
        self.updates
    }

    /// Linear epsilon schedule: `eps_start -> eps_end` over the first
    /// `eps_fraction` of total steps, then constant.
    pub fn epsilon(&self) -> f64 {
        let horizon = (self.config.total_steps as f64 * self.config.eps_fraction).max(1.0);
        let t = self.env_steps as f64;
        if t >= horizon {
            self.config.eps_end
        } else {
            self.config.eps_start + (self.config.eps_end - self.config.eps_start) * t / horizon
        }
    }

    /// Linear beta schedule over the whole run.
    pub fn beta(&self) -> f64 {
        let t = (self.env_steps as f64 / self.config.total_steps as f64).min(1.0);
        self.config.beta_start + (self.config.beta_end - self.config.beta_start) * t
    }

    /// Greedy q-values for one preprocessed observation.
    pub fn q_row(&self, obs_features: &DenseTensor) -> Result<Vec<f64>> {
        let mut shape = vec![1usize];
        shape.extend_from_slice(obs_features.shape());
        let batch = DenseTensor::from_vec(shape, obs_features.data().to_vec())?;
        let (out, _) = self.online.forward_features(&batch)?;
        let q = match self.online.support() {
            None => out,
            Some(support) => expected_q(&out, &support)?,
        };
        Ok(q.data().to_vec())
    }

    /// Acts with an explicit epsilon (evaluation uses a small fixed one).
    pub fn act_with_epsilon(&mut self, obs_features: &DenseTensor, epsilon: f64) -> Result<usize> {
        let q = self.q_row(obs_features)?;
        Ok(select_action(&q, epsilon, &mut self.rng_action))
    }

    /// Acts under the training epsilon schedule.
    pub fn act(&mut self, obs_features: &DenseTensor) -> Result<usize> {
        let eps = self.epsilon();
        self.act_with_epsilon(obs_features, eps)
    }

    /// Records one environment step. `terminal` marks a true episode end;
    /// `truncated` flushes the n-step window while keeping bootstrapping.
    pub fn observe(
        &mut self,
        obs_features: &DenseTensor,
        action: usize,
        reward: f64,
        next_obs_features: &DenseTensor,
        terminal: bool,
        truncated: bool,
    ) {
        self.env_steps += 1;
        let next32 = obs_to_vec32(next_obs_features);
        for t in self
            .nstep
            .push(obs_to_vec32(obs_features), action, reward, &next32, terminal)
        {
            self.buffer.push(t);
        }
        if truncated && !terminal {
            for t in self.nstep.flush_truncated(&next32) {
                self.buffer.push(t);
            }
        }
    }

    /// Runs one learning update when the schedule and replay gate allow it.
    /// Returns the loss when an update happened.
    pub fn try_learn(&mut self) -> Result<Option<f64>> {
        let gate = self.config.min_replay.max(self.config.batch_size);
        if self.buffer.len() < gate || self.env_steps % self.config.learn_period != 0 {
            return Ok(None);
        }
        let beta = self.beta();
        let batch = self.buffer.sample(self.config.batch_size, beta, &mut self.rng_replay)?;

        let feat_shape = self.online.feature_input_shape().to_vec();
        let plane: usize = feat_shape.iter().product();
        let b = batch.slots.len();
        let mut obs_data = Vec::with_capacity(b * plane);
        let mut boot_data = Vec::with_capacity(b * plane);
        let mut inputs = Vec::with_capacity(b);
        let mut actions = Vec::with_capacity(b);
        for &slot in &batch.slots {
            let t: &Transition = self.buffer.get(slot);
            obs_data.extend(t.obs.iter().map(|&v| v as f64));
            boot_data.extend(t.bootstrap_obs.iter().map(|&v| v as f64));
            inputs.push(TargetInput {
                n_step_reward: t.n_step_reward,
                effective_discount: t.effective_discount,
                done: t.done,
            });
            actions.push(t.action);
        }
        let mut batch_shape = vec![b];
        batch_shape.extend_from_slice(&feat_shape);
        let obs_batch = DenseTensor::from_vec(batch_shape.clone(), obs_data)?;
        let boot_batch = DenseTensor::from_vec(batch_shape, boot_data)?;

        let loss = if self.online.is_distributional() {
            self.learn_distributional(&obs_batch, &boot_batch, &inputs, &actions, &batch.weights)?
        } else {
            self.learn_scalar(&obs_batch, &boot_batch, &inputs, &actions, &batch.weights)?
        };
        if !loss.0.is_finite() {
            return Err(AgentError::Numerical(format!(
                "loss became {} at update {}",
                loss.0, self.updates
            )));
        }
        self.buffer.update_priorities(&batch.slots, &batch.stamps, &loss.1);
        self.updates += 1;
        if self.updates % self.config.target_sync_period == 0 {
            self.sync_target()?;
        }
        Ok(Some(loss.0))
    }

    fn learn_scalar(
        &mut self,
        obs_batch: &DenseTensor,
        boot_batch: &DenseTensor,
        inputs: &[TargetInput],
        actions: &[usize],
        weights: &[f64],
    ) -> Result<(f64, Vec<f64>)> {
        let targets = double_q_target(&self.online, &self.target, boot_batch, inputs)?;
        let (q_all, tape) = self.online.forward_features(obs_batch)?;
        let n_actions = q_all.shape()[1];
        let preds: Vec<f64> = actions
            .iter()
            .enumerate()
            .map(|(i, &a)| q_all.get(&[i, a]))
            .collect();
        let (loss, td, grad) = bellman_loss(&preds, &targets, weights, self.config.loss);

        let mut grad_all = DenseTensor::zeros(vec![inputs.len(), n_actions])?;
        for (i, &a) in actions.iter().enumerate() {
            grad_all.set(&[i, a], grad[i]);
        }
        self.apply_gradients(tape, &grad_all)?;
        Ok((loss, td))
    }

    fn learn_distributional(
        &mut self,
        obs_batch: &DenseTensor,
        boot_batch: &DenseTensor,
        inputs: &[TargetInput],
        actions: &[usize],
        weights: &[f64],
    ) -> Result<(f64, Vec<f64>)> {
        let support = self.online.support().expect("distributional head");
        let b = inputs.len();

        // double-Q action selection on the online expectation
        let (next_online, _) = self.online.forward_features(boot_batch)?;
        let q_next = expected_q(&next_online, &support)?;
        let (next_target, _) = self.target.forward_features(boot_batch)?;
        let n_actions = q_next.shape()[1];
        let atoms = support.len();

        let mut projected = Vec::with_capacity(b);
        for (i, inp) in inputs.iter().enumerate() {
            let row = &q_next.data()[i * n_actions..(i + 1) * n_actions];
            let a_star = argmax_lowest(row);
            let dist: Vec<f64> = (0..atoms).map(|z| next_target.get(&[i, a_star, z])).collect();
            let discount = if inp.done { 0.0 } else { inp.effective_discount };
            projected.push(project_distribution(&dist, inp.n_step_reward, discount, &support));
        }

        let (probs_all, tape) = self.online.forward_features(obs_batch)?;
        let predicted: Vec<Vec<f64>> = actions
            .iter()
            .enumerate()
            .map(|(i, &a)| (0..atoms).map(|z| probs_all.get(&[i, a, z])).collect())
            .collect();
        let (loss, ce, grads) = distributional_loss(&predicted, &projected, weights);

        let mut grad_all = DenseTensor::zeros(vec![b, n_actions, atoms])?;
        for (i, &a) in actions.iter().enumerate() {
            for z in 0..atoms {
                grad_all.set(&[i, a, z], grads[i][z]);
            }
        }
        self.apply_gradients(tape, &grad_all)?;
        Ok((loss, ce))
    }

    fn apply_gradients(&mut self, tape: autodiff_net::Tape, grad: &DenseTensor) -> Result<()> {
        self.online.zero_grad();
        if self.optimizer.config.assignment == Assignment::Kfac {
            let (_, captures) = self.online.backward_with_capture(tape, grad)?;
            self.optimizer.step(&mut self.online, &captures)?;
        } else {
            self.online.backward(tape, grad)?;
            self.optimizer.step(&mut self.online, &[])?;
        }
        Ok(())
    }

    /// Hard copy of every online parameter into the target network.
    pub fn sync_target(&mut self) -> Result<()> {
        self.target.copy_parameters_from(&self.online)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use autodiff_net::{HeadKindSpec, HeadSpec, LayerSpec, MapSpec, NetworkSpec};

    fn tiny_net(distributional: bool, seed: u64) -> Network {
        let spec = NetworkSpec {
            layers: vec![LayerSpec::Dense { width: 8 }, LayerSpec::Relu],
            head: HeadSpec {
                kind: if distributional {
                    HeadKindSpec::Distributional {
                        atoms: 11,
                        v_min: -2.0,
                        v_max: 2.0,
                    }
                } else {
                    HeadKindSpec::Scalar
                },
                dueling: true,
                value: MapSpec::Dense,
                advantage: MapSpec::Dense,
            },
        };
        Network::build(&spec, &[4], 3, seed).unwrap()
    }

    #[test]
    fn epsilon_one_is_uniform() {
        // chi-squared uniformity over 1e5 draws
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let q = vec![1.0, 5.0, -2.0];
        let mut counts = [0usize; 3];
        let draws = 100_000;
        for _ in 0..draws {
            counts[select_action(&q, 1.0, &mut rng)] += 1;
        }
        let expect = draws as f64 / 3.0;
        let chi2: f64 = counts
            .iter()
            .map(|&c| (c as f64 - expect).powi(2) / expect)
            .sum();
        // 2 degrees of freedom, 99.9% quantile ~ 13.8
        assert!(chi2 < 13.8, "chi2 {chi2} counts {counts:?}");
    }

    #[test]
    fn greedy_tie_breaks_low() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        assert_eq!(select_action(&[0.0, 5.0, 5.0], 0.0, &mut rng), 1);
    }

    #[test]
    fn distributional_act_follows_expected_value() {
        let net = tiny_net(true, 5);
        let mut agent = Agent::new(
            net,
            AgentConfig {
                min_replay: 4,
                batch_size: 4,
                ..Default::default()
            },
            OptimConfig::default(),
            5,
        )
        .unwrap();
        // craft head biases so action 2's distribution sits at high atoms
        for p in agent.online.params_mut() {
            if p.name == "head.advantage.bias" {
                let atoms = 11;
                for z in 0..atoms {
                    p.grad.data_mut()[z] = 0.0;
                    p.value.data_mut()[2 * atoms + z] = if z == atoms - 1 { 12.0 } else { 0.0 };
                }
            } else if p.name.ends_with("weight") && p.name.starts_with("head") {
                for v in p.value.data_mut() {
                    *v = 0.0;
                }
            } else if p.name == "head.value.bias" {
                for v in p.value.data_mut() {
                    *v = 0.0;
                }
            }
        }
        let obs = DenseTensor::from_vec(vec![4], vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let action = agent.act_with_epsilon(&obs, 0.0).unwrap();
        assert_eq!(action, 2);
    }

    #[test]
    fn target_sync_copies_bitwise_and_holds_between_syncs() {
        let net = tiny_net(false, 6);
        let mut agent = Agent::new(
            net,
            AgentConfig {
                min_replay: 8,
                batch_size: 4,
                n_step: 2,
                target_sync_period: 1000,
                ..Default::default()
            },
            OptimConfig::default(),
            6,
        )
        .unwrap();
        let obs = DenseTensor::from_vec(vec![4], vec![0.5; 4]).unwrap();
        // feed transitions and learn a few times
        for i in 0..64 {
            let a = agent.act(&obs).unwrap();
            agent.observe(&obs, a, if i % 7 == 0 { 1.0 } else { 0.0 }, &obs, i % 9 == 8, false);
            agent.try_learn().unwrap();
        }
        assert!(agent.updates() > 0);
        // target unchanged by online updates before the sync period
        let target_now: Vec<f64> = agent
            .target
            .params()
            .iter()
            .flat_map(|p| p.value.data().to_vec())
            .collect();
        let online_now: Vec<f64> = agent
            .online
            .params()
            .iter()
            .flat_map(|p| p.value.data().to_vec())
            .collect();
        assert_ne!(target_now, online_now);
        agent.sync_target().unwrap();
        let target_after: Vec<f64> = agent
            .target
            .params()
            .iter()
            .flat_map(|p| p.value.data().to_vec())
            .collect();
        for (a, b) in target_after.iter().zip(online_now.iter()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn schedules_follow_linear_ramps() {
        let net = tiny_net(false, 7);
        let mut agent = Agent::new(
            net,
            AgentConfig {
                total_steps: 1000,
                eps_fraction: 0.1,
                min_replay: 4,
                batch_size: 2,
                ..Default::default()
            },
            OptimConfig::default(),
            7,
        )
        .unwrap();
        assert_eq!(agent.epsilon(), 1.0);
        assert_eq!(agent.beta(), 0.4);
        let obs = DenseTensor::from_vec(vec![4], vec![0.0; 4]).unwrap();
        for _ in 0..50 {
            agent.observe(&obs, 0, 0.0, &obs, false, false);
        }
        assert!((agent.epsilon() - 0.505).abs() < 1e-12);
        for _ in 0..950 {
            agent.observe(&obs, 0, 0.0, &obs, false, false);
        }
        assert_eq!(agent.epsilon(), 0.01);
        assert_eq!(agent.beta(), 1.0);
    }
}
