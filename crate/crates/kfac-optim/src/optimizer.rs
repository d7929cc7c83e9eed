//! Optimizer driver: global gradient clipping, then per-layer updates.
//! K-FAC preconditions every captured linear map (dense layers and each TRL
//! factor treated as its own map); anything without captured statistics,
//! convolutions in particular, falls back to Adam.

use crate::adam::{clip_grad_norm, AdamConfig, AdamState};
use crate::error::Result;
use crate::kfac::{KfacConfig, KfacLayerState};
use autodiff_net::{LinearMapStats, Network};
use std::collections::BTreeMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Assignment {
    Adam,
    Kfac,
}

#[derive(Debug, Clone, Copy)]
pub struct OptimConfig {
    pub assignment: Assignment,
    pub adam: AdamConfig,
    pub kfac: KfacConfig,
    /// Learning rate applied to preconditioned gradients.
    pub kfac_lr: f64,
    pub max_grad_norm: Option<f64>,
}

impl Default for OptimConfig {
    fn default() -> Self {
        Self {
            assignment: Assignment::Adam,
            adam: AdamConfig::default(),
            kfac: KfacConfig::default(),
            kfac_lr: 1e-3,
            max_grad_norm: Some(10.0),
        }
    }
}

pub struct Optimizer {
    pub config: OptimConfig,
    adam: AdamState,
    kfac_states: BTreeMap<usize, KfacLayerState>,
}

impl Optimizer {
    pub fn new(config: OptimConfig) -> Self {
        Self {
            config,
            adam: AdamState::new(),
            kfac_states: BTreeMap::new(),
        }
    }

    /// Applies one update from the gradients accumulated in `net`.
    /// `captures` carries the per-map statistics from
    /// `backward_with_capture`; pass an empty slice under plain Adam.
    /// Returns the pre-clip gradient norm.
    pub fn step(&mut self, net: &mut Network, captures: &[LinearMapStats]) -> Result<f64> {
        let mut params = net.params_mut();
        let pre_norm = match self.config.max_grad_norm {
            Some(max) => clip_grad_norm(&mut params, max),
            None => {
                let mut sq = 0.0;
                for p in params.iter() {
                    for &g in p.grad.data() {
                        sq += g * g;
                    }
                }
                sq.sqrt()
            }
        };

        let mut kfac_handled = vec![false; params.len()];
        if self.config.assignment == Assignment::Kfac {
            for stats in captures {
                let state = self
                    .kfac_states
                    .entry(stats.weight.0)
                    .or_insert_with(|| {
                        KfacLayerState::new(
                            stats.in_dim(),
                            stats.out_dim(),
                            stats.bias.is_some(),
                            self.config.kfac,
                        )
                    });
                state.accumulate(&stats.inputs, &stats.output_grads)?;

                let weight_idx = stats.weight.0;
                let bias_idx = stats.bias.map(|b| b.0);
                let map_grad = {
                    let weight = &params[weight_idx];
                    let bias = bias_idx.map(|i| &params[i]);
                    stats.map_grad(weight, bias.map(|v| &**v))
                };
                let preconditioned = state.precondition(&map_grad)?;
                // write the preconditioned gradient back, then descend on it
                if let Some(bi) = bias_idx {
                    let (w, b) = two_mut(&mut params, weight_idx, bi);
                    stats.store_map_grad(&preconditioned, w, Some(b));
                } else {
                    stats.store_map_grad(&preconditioned, params[weight_idx], None);
                }
                kfac_handled[weight_idx] = true;
                if let Some(bi) = bias_idx {
                    kfac_handled[bi] = true;
                }
            }
        }

        self.adam.begin_step();
        for (idx, p) in params.iter_mut().enumerate() {
            if kfac_handled[idx] {
                let lr = self.config.kfac_lr;
                let grads = p.grad.data().to_vec();
                for (v, g) in p.value.data_mut().iter_mut().zip(grads) {
                    *v -= lr * g;
                }
            } else {
                self.adam.update(p, &self.config.adam);
            }
        }
        Ok(pre_norm)
    }
}

fn two_mut<'a, 'b>(
    params: &'a mut [&'b mut autodiff_net::Parameter],
    i: usize,
    j: usize,
) -> (&'a mut autodiff_net::Parameter, &'a mut autodiff_net::Parameter) {
    debug_assert_ne!(i, j);
    if i < j {
        let (left, right) = params.split_at_mut(j);
        (&mut *left[i], &mut *right[0])
    } else {
        let (left, right) = params.split_at_mut(i);
        (&mut *right[0], &mut *left[j])
    }
}
