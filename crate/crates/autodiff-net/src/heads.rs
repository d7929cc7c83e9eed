//! Output heads: dueling aggregation, scalar q-values, and the categorical
//! distributional head.

use crate::error::{shape_err, Result};
use crate::layers::{as_matrix, matrix_tensor, Dense, DenseCache, TrlCache, TrlLayer};
use crate::param::{LinearMapStats, Parameter};
use tensor_core::{DenseTensor, Matrix};

/// A head projection: plain dense or tensor-regression.
#[derive(Debug, Clone)]
pub enum LinearMap {
    Dense(Dense),
    Trl(TrlLayer),
}

pub enum LinearMapCache {
    Dense(DenseCache),
    Trl(TrlCache),
}

impl LinearMap {
    pub fn out_dim(&self) -> usize {
        match self {
            LinearMap::Dense(d) => d.out_dim(),
            LinearMap::Trl(t) => t.output,
        }
    }

    pub fn forward(&self, x: &DenseTensor) -> Result<(DenseTensor, LinearMapCache)> {
        match self {
            LinearMap::Dense(d) => {
                let (y, c) = d.forward(x)?;
                Ok((y, LinearMapCache::Dense(c)))
            }
            LinearMap::Trl(t) => {
                let (y, c) = t.forward(x)?;
                Ok((y, LinearMapCache::Trl(c)))
            }
        }
    }

    pub fn backward(
        &mut self,
        cache: LinearMapCache,
        grad_out: &DenseTensor,
        capture: Option<&mut Vec<LinearMapStats>>,
    ) -> Result<DenseTensor> {
        match (self, cache) {
            (LinearMap::Dense(d), LinearMapCache::Dense(c)) => d.backward(c, grad_out, capture),
            (LinearMap::Trl(t), LinearMapCache::Trl(c)) => t.backward(c, grad_out, capture),
            _ => Err(shape_err("head", "cache does not match map kind")),
        }
    }

    pub fn params(&self) -> Vec<&Parameter> {
        match self {
            LinearMap::Dense(d) => vec![&d.weight, &d.bias],
            LinearMap::Trl(t) => {
                let mut p: Vec<&Parameter> = vec![&t.core];
                p.extend(t.factors.iter());
                p.push(&t.bias);
                p
            }
        }
    }

    pub fn params_mut(&mut self) -> Vec<&mut Parameter> {
        match self {
            LinearMap::Dense(d) => vec![&mut d.weight, &mut d.bias],
            LinearMap::Trl(t) => {
                let mut p: Vec<&mut Parameter> = vec![&mut t.core];
                p.extend(t.factors.iter_mut());
                p.push(&mut t.bias);
                p
            }
        }
    }
}

/// Mean-centered dueling aggregation:
/// `q(s,a) = v(s) + adv(s,a) - mean_a adv(s,a)`.
///
/// The argmax over actions is invariant to adding any constant to all
/// advantages.
pub fn dueling_combine(value: &DenseTensor, advantage: &DenseTensor) -> Result<DenseTensor> {
    let batch = advantage.shape()[0];
    let actions = advantage.shape()[1];
    if value.shape()[0] != batch {
        return Err(shape_err("dueling", "batch sizes differ"));
    }
    let mut q = advantage.clone();
    for b in 0..batch {
        let row = &mut q.data_mut()[b * actions..(b + 1) * actions];
        let mean: f64 = row.iter().sum::<f64>() / actions as f64;
        let v = value.data()[b];
        for x in row.iter_mut() {
            *x = v + *x - mean;
        }
    }
    Ok(q)
}

/// Gradient of [`dueling_combine`]: returns (d_value, d_advantage).
fn dueling_backward(grad_q: &Matrix) -> (Matrix, Matrix) {
    let (batch, actions) = (grad_q.rows(), grad_q.cols());
    let mut dv = Matrix::zeros(batch, 1);
    let mut da = Matrix::zeros(batch, actions);
    for b in 0..batch {
        let row = grad_q.row(b);
        let sum: f64 = row.iter().sum();
        dv.set(b, 0, sum);
        let mean = sum / actions as f64;
        for a in 0..actions {
            da.set(b, a, row[a] - mean);
        }
    }
    (dv, da)
}

/// Scalar q-value head, optionally dueling.
#[derive(Debug, Clone)]
pub struct ScalarHead {
    pub actions: usize,
    /// Present when dueling; `advantage` then carries the advantages.
    pub value: Option<LinearMap>,
    pub advantage: LinearMap,
}

pub struct ScalarHeadCache {
    value: Option<LinearMapCache>,
    advantage: LinearMapCache,
}

impl ScalarHead {
    /// Returns q-values of shape (batch, actions).
    pub fn forward(&self, features: &DenseTensor) -> Result<(DenseTensor, ScalarHeadCache)> {
        let (adv, adv_cache) = self.advantage.forward(features)?;
        if adv.shape()[1] != self.actions {
            return Err(shape_err(
                "head",
                format!("advantage width {} != {} actions", adv.shape()[1], self.actions),
            ));
        }
        match &self.value {
            None => Ok((
                adv,
                ScalarHeadCache {
                    value: None,
                    advantage: adv_cache,
                },
            )),
            Some(v) => {
                let (val, val_cache) = v.forward(features)?;
                let q = dueling_combine(&val, &adv)?;
                Ok((
                    q,
                    ScalarHeadCache {
                        value: Some(val_cache),
                        advantage: adv_cache,
                    },
                ))
            }
        }
    }

    pub fn backward(
        &mut self,
        cache: ScalarHeadCache,
        grad_q: &DenseTensor,
        mut capture: Option<&mut Vec<LinearMapStats>>,
    ) -> Result<DenseTensor> {
        match (&mut self.value, cache.value) {
            (None, _) => self.advantage.backward(cache.advantage, grad_q, capture),
            (Some(v), Some(vc)) => {
                let (dv, da) = dueling_backward(&as_matrix(grad_q));
                let mut dx = v.backward(vc, &matrix_tensor(&dv), capture.as_deref_mut())?;
                let dx_adv =
                    self.advantage
                        .backward(cache.advantage, &matrix_tensor(&da), capture)?;
                dx.add_assign(&dx_adv)?;
                Ok(dx)
            }
            _ => Err(shape_err("head", "dueling cache mismatch")),
        }
    }
}

/// Categorical distributional head over a fixed atom support, optionally
/// dueling (per-atom mean-centered advantages before the softmax).
#[derive(Debug, Clone)]
pub struct DistributionalHead {
    pub actions: usize,
    pub atoms: usize,
    pub v_min: f64,
    pub v_max: f64,
    pub value: Option<LinearMap>,
    pub advantage: LinearMap,
}

pub struct DistributionalHeadCache {
    value: Option<LinearMapCache>,
    advantage: LinearMapCache,
    /// Softmax output (batch, actions, atoms).
    probs: DenseTensor,
}

impl DistributionalHead {
    /// Evenly spaced atom support from `v_min` to `v_max`.
    pub fn support(&self) -> Vec<f64> {
        support_points(self.atoms, self.v_min, self.v_max)
    }

    /// Returns per-action atom probabilities of shape (batch, actions, atoms).
    pub fn forward(
        &self,
        features: &DenseTensor,
    ) -> Result<(DenseTensor, DistributionalHeadCache)> {
        let batch = features.shape()[0];
        let (adv, adv_cache) = self.advantage.forward(features)?;
        let mut logits = adv
            .reshape(vec![batch, self.actions, self.atoms])
            .map_err(|_| shape_err("distributional", "advantage width != actions*atoms"))?;

        let value_cache = match &self.value {
            None => None,
            Some(v) => {
                let (val, val_cache) = v.forward(features)?; // (batch, atoms)
                // per-atom dueling combine in logit space
                for b in 0..batch {
                    for z in 0..self.atoms {
                        let mut mean = 0.0;
                        for a in 0..self.actions {
                            mean += logits.get(&[b, a, z]);
                        }
                        mean /= self.actions as f64;
                        let vz = val.get(&[b, z]);
                        for a in 0..self.actions {
                            let l = logits.get(&[b, a, z]);
                            logits.set(&[b, a, z], vz + l - mean);
                        }
                    }
                }
                Some(val_cache)
            }
        };

        let probs = softmax_last(&logits);
        Ok((
            probs.clone(),
            DistributionalHeadCache {
                value: value_cache,
                advantage: adv_cache,
                probs,
            },
        ))
    }

    pub fn backward(
        &mut self,
        cache: DistributionalHeadCache,
        grad_probs: &DenseTensor,
        mut capture: Option<&mut Vec<LinearMapStats>>,
    ) -> Result<DenseTensor> {
        let batch = grad_probs.shape()[0];
        // softmax jacobian per (batch, action) row
        let mut dlogits = DenseTensor::zeros(grad_probs.shape().to_vec())?;
        for b in 0..batch {
            for a in 0..self.actions {
                let mut dot = 0.0;
                for z in 0..self.atoms {
                    dot += cache.probs.get(&[b, a, z]) * grad_probs.get(&[b, a, z]);
                }
                for z in 0..self.atoms {
                    let p = cache.probs.get(&[b, a, z]);
                    dlogits.set(&[b, a, z], p * (grad_probs.get(&[b, a, z]) - dot));
                }
            }
        }

        match (&mut self.value, cache.value) {
            (None, _) => {
                let flat = dlogits.reshape(vec![batch, self.actions * self.atoms])?;
                self.advantage.backward(cache.advantage, &flat, capture)
            }
            (Some(v), Some(vc)) => {
                // split per-atom dueling gradients
                let mut dval = DenseTensor::zeros(vec![batch, self.atoms])?;
                let mut dadv = DenseTensor::zeros(vec![batch, self.actions, self.atoms])?;
                for b in 0..batch {
                    for z in 0..self.atoms {
                        let mut sum = 0.0;
                        for a in 0..self.actions {
                            sum += dlogits.get(&[b, a, z]);
                        }
                        dval.set(&[b, z], sum);
                        let mean = sum / self.actions as f64;
                        for a in 0..self.actions {
                            dadv.set(&[b, a, z], dlogits.get(&[b, a, z]) - mean);
                        }
                    }
                }
                let mut dx = v.backward(vc, &dval, capture.as_deref_mut())?;
                let flat = dadv.reshape(vec![batch, self.actions * self.atoms])?;
                let dx_adv = self.advantage.backward(cache.advantage, &flat, capture)?;
                dx.add_assign(&dx_adv)?;
                Ok(dx)
            }
            _ => Err(shape_err("head", "dueling cache mismatch")),
        }
    }
}

/// Evenly spaced support of `atoms` points from `v_min` to `v_max`.
pub fn support_points(atoms: usize, v_min: f64, v_max: f64) -> Vec<f64> {
    debug_assert!(atoms >= 2 && v_min < v_max);
    let dz = (v_max - v_min) / (atoms - 1) as f64;
    (0..atoms).map(|i| v_min + dz * i as f64).collect()
}

/// Expected scalar q-values under per-action atom distributions:
/// input (batch, actions, atoms) -> (batch, actions).
pub fn expected_q(probs: &DenseTensor, support: &[f64]) -> Result<DenseTensor> {
    let s = probs.shape();
    if s.len() != 3 || s[2] != support.len() {
        return Err(shape_err("expected_q", format!("shape {s:?}")));
    }
    let (batch, actions, atoms) = (s[0], s[1], s[2]);
    let mut q = DenseTensor::zeros(vec![batch, actions])?;
    for b in 0..batch {
        for a in 0..actions {
            let mut acc = 0.0;
            for z in 0..atoms {
                acc += probs.get(&[b, a, z]) * support[z];
            }
            q.set(&[b, a], acc);
        }
    }
    Ok(q)
}

/// Numerically stable softmax over the last mode.
fn softmax_last(logits: &DenseTensor) -> DenseTensor {
    let atoms = *logits.shape().last().unwrap();
    let mut out = logits.clone();
    for row in out.data_mut().chunks_mut(atoms) {
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dueling_zero_advantage_gives_value() {
        let v = DenseTensor::from_vec(vec![2, 1], vec![1.5, -0.5]).unwrap();
        let adv = DenseTensor::zeros(vec![2, 3]).unwrap();
        let q = dueling_combine(&v, &adv).unwrap();
        assert_eq!(q.data(), &[1.5, 1.5, 1.5, -0.5, -0.5, -0.5]);
    }

    #[test]
    fn dueling_constant_shift_invariance() {
        let v = DenseTensor::from_vec(vec![1, 1], vec![0.3]).unwrap();
        let adv = DenseTensor::from_vec(vec![1, 3], vec![0.1, -0.4, 2.0]).unwrap();
        let mut shifted = adv.clone();
        for x in shifted.data_mut() {
            *x += 7.25;
        }
        let q1 = dueling_combine(&v, &adv).unwrap();
        let q2 = dueling_combine(&v, &shifted).unwrap();
        assert!(q1.max_abs_diff(&q2).unwrap() < 1e-12);
        let argmax = |q: &DenseTensor| {
            q.data()
                .iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |best, (i, &v)| {
                    if v > best.1 {
                        (i, v)
                    } else {
                        best
                    }
                })
                .0
        };
        assert_eq!(argmax(&q1), argmax(&q2));
    }

    #[test]
    fn dueling_hand_example() {
        // v=1, adv=[1,3]: q = v + (adv - mean) = [0, 2]
        let v = DenseTensor::from_vec(vec![1, 1], vec![1.0]).unwrap();
        let adv = DenseTensor::from_vec(vec![1, 2], vec![1.0, 3.0]).unwrap();
        let q = dueling_combine(&v, &adv).unwrap();
        assert_eq!(q.data(), &[0.0, 2.0]);
    }

    #[test]
    fn support_is_even() {
        let s = support_points(51, -10.0, 10.0);
        assert_eq!(s.len(), 51);
        assert_eq!(s[0], -10.0);
        assert_eq!(s[50], 10.0);
        assert!((s[26] - 0.4).abs() < 1e-12);
    }

    #[test]
    fn softmax_uniform_logits() {
        let logits = DenseTensor::zeros(vec![1, 2, 5]).unwrap();
        let p = softmax_last(&logits);
        for &v in p.data() {
            assert!((v - 0.2).abs() < 1e-12);
        }
        let q = expected_q(&p, &support_points(5, -10.0, 10.0)).unwrap();
        // uniform distribution, symmetric support: q is the midpoint
        for &v in q.data() {
            assert!(v.abs() < 1e-12);
        }
    }

    #[test]
    fn dominant_logit_concentrates_mass() {
        let mut logits = DenseTensor::zeros(vec![1, 1, 51]).unwrap();
        logits.set(&[0, 0, 7], 50.0);
        let p = softmax_last(&logits);
        let support = support_points(51, -10.0, 10.0);
        let q = expected_q(&p, &support).unwrap();
        assert!((q.get(&[0, 0]) - support[7]).abs() < 1e-4);
        // rows are probability distributions
        let sum: f64 = p.data().iter().sum();
        assert!((sum - 1.0).abs() < 1e-6);
        assert!(p.data().iter().all(|&v| v >= 0.0));
    }
}
