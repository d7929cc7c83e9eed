//! Bias-corrected Adam.

use autodiff_net::Parameter;
use tensor_core::DenseTensor;

#[derive(Debug, Clone, Copy)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1.5e-4,
        }
    }
}

struct Moments {
    m: DenseTensor,
    v: DenseTensor,
}

/// Per-parameter moment state, keyed by the dense `ParamId`.
#[derive(Default)]
pub struct AdamState {
    moments: Vec<Option<Moments>>,
    t: u64,
}

impl AdamState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn step_count(&self) -> u64 {
        self.t
    }

    /// Advances the shared step counter; call once per optimizer step.
    pub fn begin_step(&mut self) {
        self.t += 1;
    }

    /// Applies one Adam update to a parameter from its accumulated gradient.
    /// `begin_step` must have been called for this step.
    pub fn update(&mut self, param: &mut Parameter, cfg: &AdamConfig) {
        debug_assert!(self.t > 0, "begin_step before update");
        let idx = param.id.0;
        if self.moments.len() <= idx {
            self.moments.resize_with(idx + 1, || None);
        }
        let slot = self.moments[idx].get_or_insert_with(|| Moments {
            m: DenseTensor::zeros(param.value.shape().to_vec()).expect("valid shape"),
            v: DenseTensor::zeros(param.value.shape().to_vec()).expect("valid shape"),
        });
        let bc1 = 1.0 - cfg.beta1.powi(self.t as i32);
        let bc2 = 1.0 - cfg.beta2.powi(self.t as i32);
        let g = param.grad.data();
        let m = slot.m.data_mut();
        let v = slot.v.data_mut();
        let theta = param.value.data_mut();
        for i in 0..g.len() {
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
            let m_hat = m[i] / bc1;
            let v_hat = v[i] / bc2;
            theta[i] -= cfg.lr * m_hat / (v_hat.sqrt() + cfg.eps);
        }
    }
}

/// Scales all gradients so the global L2 norm does not exceed `max_norm`;
/// returns the pre-clip norm.
pub fn clip_grad_norm(params: &mut [&mut Parameter], max_norm: f64) -> f64 {
    let mut sq = 0.0;
    for p in params.iter() {
        for &g in p.grad.data() {
            sq += g * g;
        }
    }
    let norm = sq.sqrt();
    if norm > max_norm && norm > 0.0 {
        let scale = max_norm / norm;
        for p in params.iter_mut() {
            for g in p.grad.data_mut() {
                *g *= scale;
            }
        }
    }
    norm
}
