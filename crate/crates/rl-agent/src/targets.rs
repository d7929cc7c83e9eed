//! Target computation and losses: double-Q bootstrap targets, IS-weighted
//! squared Bellman loss, and the categorical projection with cross-entropy.

use crate::error::{AgentError, Result};
use autodiff_net::{expected_q, Network};
use tensor_core::DenseTensor;

/// Argmax with lowest-index tie-break.
pub fn argmax_lowest(values: &[f64]) -> usize {
    let mut best = 0;
    let mut best_v = f64::NEG_INFINITY;
    for (i, &v) in values.iter().enumerate() {
        if v > best_v {
            best_v = v;
            best = i;
        }
    }
    best
}

/// Per-sample ingredients for a bootstrap target.
#[derive(Debug, Clone, Copy)]
pub struct TargetInput {
    pub n_step_reward: f64,
    pub effective_discount: f64,
    pub done: bool,
}

/// Double-Q targets: `y = r + gamma_eff * q_target(s', argmax_a
/// q_online(s', a))`, with the bootstrap dropped on terminal transitions.
///
/// `bootstrap_batch` holds the t+n observations (already preprocessed when
/// the network has a front-end).
pub fn double_q_target(
    online: &Network,
    target: &Network,
    bootstrap_batch: &DenseTensor,
    inputs: &[TargetInput],
) -> Result<Vec<f64>> {
    let q_online = q_of(online, bootstrap_batch)?;
    let q_target = q_of(target, bootstrap_batch)?;
    let actions = q_online.shape()[1];
    let mut out = Vec::with_capacity(inputs.len());
    for (i, inp) in inputs.iter().enumerate() {
        if inp.done {
            out.push(inp.n_step_reward);
        } else {
            let row = &q_online.data()[i * actions..(i + 1) * actions];
            let a_star = argmax_lowest(row);
            out.push(inp.n_step_reward + inp.effective_discount * q_target.get(&[i, a_star]));
        }
    }
    Ok(out)
}

fn q_of(net: &Network, batch: &DenseTensor) -> Result<DenseTensor> {
    let (out, _) = net.forward_features(batch)?;
    match net.support() {
        None => Ok(out),
        Some(support) => Ok(expected_q(&out, &support)?),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKind {
    /// Plain squared error, as written in the Bellman loss.
    Squared,
    /// Quadratic inside the unit clip, linear outside.
    ClampedQuadratic,
}

/// IS-weighted Bellman loss over action-value predictions for the taken
/// actions. Returns the scalar loss, per-sample |td| errors for priority
/// updates, and the gradient with respect to the predictions.
pub fn bellman_loss(
    predictions: &[f64],
    targets: &[f64],
    weights: &[f64],
    kind: LossKind,
) -> (f64, Vec<f64>, Vec<f64>) {
    let n = predictions.len() as f64;
    let mut loss = 0.0;
    let mut td = Vec::with_capacity(predictions.len());
    let mut grad = Vec::with_capacity(predictions.len());
    for ((&q, &y), &w) in predictions.iter().zip(targets).zip(weights) {
        let e = y - q;
        td.push(e.abs());
        match kind {
            LossKind::Squared => {
                loss += w * e * e;
                grad.push(-2.0 * w * e / n);
            }
            LossKind::ClampedQuadratic => {
                if e.abs() <= 1.0 {
                    loss += w * e * e;
                    grad.push(-2.0 * w * e / n);
                } else {
                    loss += w * (2.0 * e.abs() - 1.0);
                    grad.push(-2.0 * w * e.signum() / n);
                }
            }
        }
    }
    (loss / n, td, grad)
}

/// Projects one `r + gamma_eff * z` shifted atom distribution back onto the
/// fixed support, splitting mass linearly between the two nearest atoms.
pub fn project_distribution(
    probs: &[f64],
    reward: f64,
    discount: f64,
    support: &[f64],
) -> Vec<f64> {
    let atoms = support.len();
    debug_assert_eq!(probs.len(), atoms);
    let v_min = support[0];
    let v_max = support[atoms - 1];
    let dz = (v_max - v_min) / (atoms - 1) as f64;
    let mut out = vec![0.0; atoms];
    for (j, &p) in probs.iter().enumerate() {
        if p == 0.0 {
            continue;
        }
        let z = (reward + discount * support[j]).clamp(v_min, v_max);
        let b = (z - v_min) / dz;
        let low = b.floor() as usize;
        let high = b.ceil() as usize;
        if low == high {
            out[low] += p;
        } else {
            out[low] += p * (high as f64 - b);
            out[high] += p * (b - low as f64);
        }
    }
    out
}

/// IS-weighted cross-entropy between projected target distributions and
/// predicted distributions for the taken actions. Returns the scalar loss,
/// per-sample cross-entropies (the priority signal), and the gradient with
/// respect to the predicted probabilities.
pub fn distributional_loss(
    predicted: &[Vec<f64>],
    projected: &[Vec<f64>],
    weights: &[f64],
) -> (f64, Vec<f64>, Vec<Vec<f64>>) {
    let n = predicted.len() as f64;
    let mut loss = 0.0;
    let mut ce_per_sample = Vec::with_capacity(predicted.len());
    let mut grads = Vec::with_capacity(predicted.len());
    for ((p, m), &w) in predicted.iter().zip(projected).zip(weights) {
        let mut ce = 0.0;
        let mut g = Vec::with_capacity(p.len());
        for (&pj, &mj) in p.iter().zip(m) {
            let pj_safe = pj.max(1e-12);
            if mj > 0.0 {
                ce -= mj * pj_safe.ln();
            }
            g.push(-w * mj / pj_safe / n);
        }
        loss += w * ce;
        ce_per_sample.push(ce);
        grads.push(g);
    }
    (loss / n, ce_per_sample, grads)
}

/// Validates that a projected distribution still sums to one.
pub fn check_mass(projected: &[f64]) -> Result<()> {
    let sum: f64 = projected.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(AgentError::Numerical(format!(
            "projected distribution mass {sum}"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn argmax_breaks_ties_low() {
        assert_eq!(argmax_lowest(&[0.0, 5.0, 5.0]), 1);
        assert_eq!(argmax_lowest(&[7.0, 5.0, 7.0]), 0);
    }

    #[test]
    fn bellman_loss_zero_when_exact() {
        let (loss, td, grad) = bellman_loss(&[1.0, 2.0], &[1.0, 2.0], &[1.0, 1.0], LossKind::Squared);
        assert_eq!(loss, 0.0);
        assert!(td.iter().all(|&t| t == 0.0));
        assert!(grad.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn bellman_loss_single_sample() {
        // w=1, y-q = 2: loss 4
        let (loss, td, _) = bellman_loss(&[0.0], &[2.0], &[1.0], LossKind::Squared);
        assert_eq!(loss, 4.0);
        assert_eq!(td, vec![2.0]);
    }

    #[test]
    fn bellman_gradient_matches_finite_differences() {
        let targets = [0.3, -0.7, 1.2];
        let weights = [1.0, 0.5, 0.8];
        let preds = [0.1, 0.2, -0.4];
        for kind in [LossKind::Squared, LossKind::ClampedQuadratic] {
            let (_, _, grad) = bellman_loss(&preds, &targets, &weights, kind);
            let h = 1e-6;
            for i in 0..preds.len() {
                let mut plus = preds;
                plus[i] += h;
                let mut minus = preds;
                minus[i] -= h;
                let (lp, _, _) = bellman_loss(&plus, &targets, &weights, kind);
                let (lm, _, _) = bellman_loss(&minus, &targets, &weights, kind);
                let numeric = (lp - lm) / (2.0 * h);
                assert!(
                    (grad[i] - numeric).abs() < 1e-6 * grad[i].abs().max(1.0),
                    "{kind:?} grad {} vs {}",
                    grad[i],
                    numeric
                );
            }
        }
    }

    #[test]
    fn clamped_loss_saturates_gradient() {
        let (_, _, g_small) = bellman_loss(&[0.0], &[0.5], &[1.0], LossKind::ClampedQuadratic);
        let (_, _, g_big) = bellman_loss(&[0.0], &[10.0], &[1.0], LossKind::ClampedQuadratic);
        assert!((g_small[0] + 1.0).abs() < 1e-12); // -2 * 0.5
        assert!((g_big[0] + 2.0).abs() < 1e-12); // clamped at -2
    }

    #[test]
    fn projection_identity_when_unshifted() {
        let support = autodiff_net::support_points(11, -5.0, 5.0);
        let probs: Vec<f64> = (0..11).map(|i| (i + 1) as f64 / 66.0).collect();
        let out = project_distribution(&probs, 0.0, 1.0, &support);
        for (a, b) in out.iter().zip(&probs) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn projection_collapses_at_zero_discount() {
        let support = autodiff_net::support_points(5, -2.0, 2.0);
        let probs = vec![0.2; 5];
        // r = v_min, discount 0: all mass on the first atom
        let out = project_distribution(&probs, -2.0, 0.0, &support);
        assert!((out[0] - 1.0).abs() < 1e-12);
        assert!(out[1..].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn projection_matches_per_atom_split_oracle() {
        let atoms = 51;
        let support = autodiff_net::support_points(atoms, -10.0, 10.0);
        let mut probs: Vec<f64> = (0..atoms).map(|i| ((i * 7 + 3) % 13) as f64 + 0.5).collect();
        let total: f64 = probs.iter().sum();
        for p in &mut probs {
            *p /= total;
        }
        let (r, g) = (0.7, 0.99);
        let got = project_distribution(&probs, r, g, &support);

        // direct per-atom split oracle
        let v_min = -10.0;
        let v_max = 10.0;
        let dz = (v_max - v_min) / (atoms - 1) as f64;
        let mut oracle = vec![0.0; atoms];
        for j in 0..atoms {
            let z: f64 = (r + g * support[j]).clamp(v_min, v_max);
            let b = (z - v_min) / dz;
            let l = b.floor();
            let u = b.ceil();
            if (l - u).abs() < f64::EPSILON {
                oracle[l as usize] += probs[j];
            } else {
                oracle[l as usize] += probs[j] * (u - b);
                oracle[u as usize] += probs[j] * (b - l);
            }
        }
        for (a, b) in got.iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-12);
        }
        check_mass(&got).unwrap();
    }

    #[test]
    fn projection_conserves_mass_across_shifts() {
        let support = autodiff_net::support_points(21, -3.0, 3.0);
        let probs = vec![1.0 / 21.0; 21];
        for k in 0..40 {
            let r = -4.0 + 0.2 * k as f64;
            let out = project_distribution(&probs, r, 0.97, &support);
            let sum: f64 = out.iter().sum();
            assert!((sum - 1.0).abs() < 1e-9, "r {r}: mass {sum}");
        }
    }
}
