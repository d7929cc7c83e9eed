//! Environment interface and the frame-stacking wrapper.

use std::collections::VecDeque;
use tensor_core::DenseTensor;

/// One environment transition. `done` marks a true terminal; `truncated` a
/// horizon cut where bootstrapping should continue.
#[derive(Debug, Clone)]
pub struct EnvStep {
    pub observation: DenseTensor,
    pub reward: f64,
    pub done: bool,
    pub truncated: bool,
    /// Step counter within the episode.
    pub step: usize,
}

pub trait Env {
    fn obs_shape(&self) -> Vec<usize>;
    fn num_actions(&self) -> usize;
    fn reset(&mut self) -> DenseTensor;
    fn step(&mut self, action: usize) -> EnvStep;
}

/// Stacks the most recent `frames` observations along the channel mode.
/// The reset observation is repeated to fill the stack; channel order is
/// oldest first.
pub struct FrameStack<E: Env> {
    pub inner: E,
    frames: usize,
    buf: VecDeque<DenseTensor>,
}

impl<E: Env> FrameStack<E> {
    pub fn new(inner: E, frames: usize) -> Self {
        assert!(frames >= 1);
        Self {
            inner,
            frames,
            buf: VecDeque::with_capacity(frames),
        }
    }

    fn stacked(&self) -> DenseTensor {
        let single = self.buf.front().expect("stack filled").shape().to_vec();
        let (c, h, w) = (single[0], single[1], single[2]);
        let mut data = Vec::with_capacity(self.frames * c * h * w);
        for frame in &self.buf {
            data.extend_from_slice(frame.data());
        }
        DenseTensor::from_vec(vec![self.frames * c, h, w], data).expect("stack shape")
    }
}

impl<E: Env> Env for FrameStack<E> {
    fn obs_shape(&self) -> Vec<usize> {
        let s = self.inner.obs_shape();
        vec![self.frames * s[0], s[1], s[2]]
    }

    fn num_actions(&self) -> usize {
        self.inner.num_actions()
    }

    fn reset(&mut self) -> DenseTensor {
        let first = self.inner.reset();
        self.buf.clear();
        for _ in 0..self.frames {
            self.buf.push_back(first.clone());
        }
        self.stacked()
    }

    fn step(&mut self, action: usize) -> EnvStep {
        let step = self.inner.step(action);
        self.buf.pop_front();
        self.buf.push_back(step.observation.clone());
        EnvStep {
            observation: self.stacked(),
            ..step
        }
    }
}
