//! Experience records with n-step discounted returns.
//!
//! Observations are stored as f32 to halve replay memory; all arithmetic on
//! them happens in f64 after widening.

use std::collections::VecDeque;
use tensor_core::DenseTensor;

/// One stored experience: the observation at time t, the action taken, the
/// n-step discounted reward, the bootstrap observation at t+n (or the last
/// one seen when the episode ended inside the window), the terminal flag,
/// and the effective discount `gamma^m` with m the realized window length.
#[derive(Debug, Clone)]
pub struct Transition {
    pub obs: Vec<f32>,
    pub action: usize,
    pub n_step_reward: f64,
    pub bootstrap_obs: Vec<f32>,
    pub done: bool,
    pub effective_discount: f64,
}

pub fn obs_to_vec32(t: &DenseTensor) -> Vec<f32> {
    t.data().iter().map(|&v| v as f32).collect()
}

pub fn obs_to_tensor(data: &[f32], shape: &[usize]) -> DenseTensor {
    DenseTensor::from_vec(shape.to_vec(), data.iter().map(|&v| v as f64).collect())
        .expect("stored obs matches shape")
}

/// Rolls single-step experience into n-step transitions.
struct Pending {
    obs: Vec<f32>,
    action: usize,
    reward: f64,
}

pub struct NStepAccumulator {
    n: usize,
    gamma: f64,
    window: VecDeque<Pending>,
}

impl NStepAccumulator {
    pub fn new(n: usize, gamma: f64) -> Self {
        assert!(n >= 1);
        Self {
            n,
            gamma,
            window: VecDeque::with_capacity(n),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.window.is_empty()
    }

    /// Feeds one environment step and returns any transitions that become
    /// complete. `next_obs` is the observation after the step; `terminal`
    /// marks a real episode end (the bootstrap is then dropped).
    pub fn push(
        &mut self,
        obs: Vec<f32>,
        action: usize,
        reward: f64,
        next_obs: &[f32],
        terminal: bool,
    ) -> Vec<Transition> {
        self.window.push_back(Pending { obs, action, reward });
        if terminal {
            return self.drain(next_obs, true);
        }
        let mut out = Vec::new();
        if self.window.len() == self.n {
            out.push(self.emit_front(next_obs, false));
        }
        out
    }

    /// Flushes the remaining window without marking it terminal, for
    /// episode truncation: targets keep bootstrapping from `next_obs`.
    pub fn flush_truncated(&mut self, next_obs: &[f32]) -> Vec<Transition> {
        self.drain(next_obs, false)
    }

    fn drain(&mut self, bootstrap: &[f32], terminal: bool) -> Vec<Transition> {
        let mut out = Vec::with_capacity(self.window.len());
        while !self.window.is_empty() {
            out.push(self.emit_front(bootstrap, terminal));
        }
        out
    }

    fn emit_front(&mut self, bootstrap: &[f32], terminal: bool) -> Transition {
        let mut reward = 0.0;
        let mut discount = 1.0;
        for p in self.window.iter() {
            reward += discount * p.reward;
            discount *= self.gamma;
        }
        let len = self.window.len() as i32;
        let front = self.window.pop_front().expect("nonempty window");
        Transition {
            obs: front.obs,
            action: front.action,
            n_step_reward: reward,
            bootstrap_obs: bootstrap.to_vec(),
            done: terminal,
            effective_discount: self.gamma.powi(len),
        }
    }
}
