//! Catch: a ball falls straight down a G x G grid from a seeded uniform
//! column; the paddle on the bottom row moves left/stay/right. The episode
//! lasts exactly G-1 steps and pays +1 on a catch, -1 on a miss, at the
//! final step only.

use crate::env::{Env, EnvStep};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tensor_core::DenseTensor;

pub const CATCH_ACTIONS: usize = 3; // left, stay, right

pub struct CatchEnv {
    grid: usize,
    ball_row: usize,
    ball_col: usize,
    paddle_col: usize,
    step_idx: usize,
    done: bool,
    rng: ChaCha8Rng,
}

impl CatchEnv {
    pub fn new(grid: usize, seed: u64) -> Self {
        assert!(grid >= 3);
        Self {
            grid,
            ball_row: 0,
            ball_col: 0,
            paddle_col: grid / 2,
            step_idx: 0,
            done: true,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn grid(&self) -> usize {
        self.grid
    }

    /// Episode length is fixed: the ball takes G-1 steps to reach the
    /// bottom row.
    pub fn episode_length(&self) -> usize {
        self.grid - 1
    }

    pub fn ball_col(&self) -> usize {
        self.ball_col
    }

    pub fn paddle_col(&self) -> usize {
        self.paddle_col
    }

    fn render(&self) -> DenseTensor {
        let g = self.grid;
        let mut data = vec![0.0; g * g];
        data[self.ball_row * g + self.ball_col] = 1.0;
        data[(g - 1) * g + self.paddle_col] = 1.0;
        DenseTensor::from_vec(vec![1, g, g], data).expect("grid shape")
    }
}

impl Env for CatchEnv {
    fn obs_shape(&self) -> Vec<usize> {
        vec![1, self.grid, self.grid]
    }

    fn num_actions(&self) -> usize {
        CATCH_ACTIONS
    }

    fn reset(&mut self) -> DenseTensor {
        self.ball_row = 0;
        self.ball_col = self.rng.gen_range(0..self.grid);
        self.paddle_col = self.grid / 2;
        self.step_idx = 0;
        self.done = false;
        self.render()
    }

    fn step(&mut self, action: usize) -> EnvStep {
        assert!(!self.done, "step after episode end");
        match action {
            0 => self.paddle_col = self.paddle_col.saturating_sub(1),
            1 => {}
            2 => self.paddle_col = (self.paddle_col + 1).min(self.grid - 1),
            other => panic!("catch has 3 actions, got {other}"),
        }
        self.ball_row += 1;
        self.step_idx += 1;
        let done = self.ball_row == self.grid - 1;
        let reward = if done {
            if self.paddle_col == self.ball_col {
                1.0
            } else {
                -1.0
            }
        } else {
            0.0
        };
        self.done = done;
        EnvStep {
            observation: self.render(),
            reward,
            done,
            truncated: false,
            step: self.step_idx,
        }
    }
}

/// Monte-Carlo estimate of the uniform-random-policy return on Catch, with
/// the same dynamics but no observation rendering. Returns (mean, stddev of
/// the per-episode return).
pub fn random_policy_baseline(grid: usize, episodes: usize, seed: u64) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..episodes {
        let ball_col = rng.gen_range(0..grid);
        let mut paddle = grid / 2;
        for _ in 0..grid - 1 {
            match rng.gen_range(0..3) {
                0 => paddle = paddle.saturating_sub(1),
                1 => {}
                _ => paddle = (paddle + 1).min(grid - 1),
            }
        }
        let r = if paddle == ball_col { 1.0 } else { -1.0 };
        sum += r;
        sum_sq += r * r;
    }
    let mean = sum / episodes as f64;
    let var = (sum_sq / episodes as f64 - mean * mean).max(0.0);
    (mean, var.sqrt())
}
