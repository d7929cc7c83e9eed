//! A deterministic K-state chain with an exact value-iteration oracle: the
//! end-to-end correctness probe for replay, targets, loss, and optimizer.

use crate::env::{Env, EnvStep};
use tensor_core::DenseTensor;

pub const CHAIN_ACTIONS: usize = 2; // left, right

/// States 0..K-1 in a line; `right` moves toward the terminal rightmost
/// state, `left` moves back (staying put at 0). Entering state K-1 pays +1
/// and ends the episode. Episodes are truncated (not terminated) after
/// `horizon` steps.
pub struct ChainMdp {
    k: usize,
    state: usize,
    step_idx: usize,
    horizon: usize,
    done: bool,
}

impl ChainMdp {
    pub fn new(k: usize, horizon: usize) -> Self {
        assert!(k >= 2);
        Self {
            k,
            state: 0,
            step_idx: 0,
            horizon,
            done: true,
        }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn state(&self) -> usize {
        self.state
    }

    fn one_hot(&self) -> DenseTensor {
        let mut data = vec![0.0; self.k];
        data[self.state] = 1.0;
        DenseTensor::from_vec(vec![self.k], data).expect("one-hot")
    }
}

impl Env for ChainMdp {
    fn obs_shape(&self) -> Vec<usize> {
        vec![self.k]
    }

    fn num_actions(&self) -> usize {
        CHAIN_ACTIONS
    }

    fn reset(&mut self) -> DenseTensor {
        self.state = 0;
        self.step_idx = 0;
        self.done = false;
        self.one_hot()
    }

    fn step(&mut self, action: usize) -> EnvStep {
        assert!(!self.done, "step after episode end");
        match action {
            0 => self.state = self.state.saturating_sub(1),
            1 => self.state += 1,
            other => panic!("chain has 2 actions, got {other}"),
        }
        self.step_idx += 1;
        let done = self.state == self.k - 1;
        let reward = if done { 1.0 } else { 0.0 };
        let truncated = !done && self.step_idx >= self.horizon;
        self.done = done || truncated;
        EnvStep {
            observation: self.one_hot(),
            reward,
            done,
            truncated,
            step: self.step_idx,
        }
    }
}

/// Exact q-table of the chain by value iteration, indexed `[state][action]`
/// with the terminal state fixed at zero. Runs until the sup-norm residual
/// drops below `tol`.
pub fn value_iteration(k: usize, gamma: f64, tol: f64) -> Vec<[f64; 2]> {
    let mut q = vec![[0.0f64; 2]; k];
    loop {
        let mut residual: f64 = 0.0;
        for s in 0..k - 1 {
            for (a, next) in [(0usize, s.saturating_sub(1)), (1usize, s + 1)] {
                let terminal = next == k - 1;
                let reward = if terminal { 1.0 } else { 0.0 };
                let bootstrap = if terminal {
                    0.0
                } else {
                    q[next][0].max(q[next][1])
                };
                let new = reward + gamma * bootstrap;
                residual = residual.max((new - q[s][a]).abs());
                q[s][a] = new;
            }
        }
        if residual < tol {
            return q;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_state_chain_q_is_one() {
        let q = value_iteration(2, 0.99, 1e-12);
        assert!((q[0][1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn closed_form_gamma_powers() {
        // q*(s, right) = gamma^(K-2-s)
        let gamma: f64 = 0.99;
        let q = value_iteration(5, gamma, 1e-12);
        assert!((q[0][1] - gamma.powi(3)).abs() < 1e-10);
        assert!((q[0][1] - 0.970299).abs() < 1e-6);
        for s in 0..4 {
            assert!((q[s][1] - gamma.powi(3 - s as i32)).abs() < 1e-10);
        }
        // left from state s returns to s-1: one extra step each way
        assert!((q[1][0] - gamma * q[0][1]).abs() < 1e-10);
    }

    #[test]
    fn zero_discount_rewards_only_adjacent_to_goal() {
        let q = value_iteration(6, 0.0, 1e-12);
        for s in 0..5 {
            for a in 0..2 {
                let expect = if s == 4 && a == 1 { 1.0 } else { 0.0 };
                assert_eq!(q[s][a], expect);
            }
        }
    }

    #[test]
    fn env_reaches_goal_and_truncates() {
        let mut env = ChainMdp::new(4, 10);
        env.reset();
        // straight right: 3 steps to terminal
        let mut last = None;
        for _ in 0..3 {
            last = Some(env.step(1));
        }
        let last = last.unwrap();
        assert!(last.done);
        assert_eq!(last.reward, 1.0);

        // wander left forever: truncates at the horizon without reward
        env.reset();
        for i in 1..=10 {
            let s = env.step(0);
            assert_eq!(s.reward, 0.0);
            if i < 10 {
                assert!(!s.done && !s.truncated);
            } else {
                assert!(!s.done && s.truncated);
            }
        }
    }
}
