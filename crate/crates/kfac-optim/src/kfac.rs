//! Kronecker-factored curvature state per linear map: running second moments
//! of inputs and output gradients, factored Tikhonov damping with trace
//! balancing, and the two-sided preconditioning apply.

use crate::error::{OptimError, Result};
use tensor_core::{sym_eig, Matrix};

#[derive(Debug, Clone, Copy)]
pub struct KfacConfig {
    /// Tikhonov damping constant.
    pub damping: f64,
    /// Exponential decay of the covariance statistics.
    pub stat_decay: f64,
    /// Inverses are refreshed after this many preconditioned updates.
    pub update_period: usize,
    /// Eigenvalue floor applied when damping is positive.
    pub min_eig: f64,
}

impl Default for KfacConfig {
    fn default() -> Self {
        Self {
            damping: 0.1,
            stat_decay: 0.95,
            update_period: 100,
            min_eig: 1e-10,
        }
    }
}

/// Curvature statistics of one linear map. The input side is augmented with
/// a homogeneous 1 when the map carries a bias.
pub struct KfacLayerState {
    a_cov: Matrix,
    b_cov: Matrix,
    a_inv: Option<Matrix>,
    b_inv: Option<Matrix>,
    has_bias: bool,
    initialized: bool,
    steps_since_inverse: usize,
    config: KfacConfig,
}

impl KfacLayerState {
    /// `in_dim` excludes the bias column; the A factor gets one extra
    /// row/column when `has_bias`.
    pub fn new(in_dim: usize, out_dim: usize, has_bias: bool, config: KfacConfig) -> Self {
        let a_dim = in_dim + usize::from(has_bias);
        Self {
            a_cov: Matrix::zeros(a_dim, a_dim),
            b_cov: Matrix::zeros(out_dim, out_dim),
            a_inv: None,
            b_inv: None,
            has_bias,
            initialized: false,
            steps_since_inverse: 0,
            config,
        }
    }

    /// State with exact covariances, for benchmarks and oracles.
    pub fn with_covariances(a_cov: Matrix, b_cov: Matrix, config: KfacConfig) -> Self {
        Self {
            a_cov,
            b_cov,
            a_inv: None,
            b_inv: None,
            has_bias: false,
            initialized: true,
            steps_since_inverse: 0,
            config,
        }
    }

    pub fn a_cov(&self) -> &Matrix {
        &self.a_cov
    }

    pub fn b_cov(&self) -> &Matrix {
        &self.b_cov
    }

    pub fn a_dim(&self) -> usize {
        self.a_cov.rows()
    }

    pub fn out_dim(&self) -> usize {
        self.b_cov.rows()
    }

    /// Folds one batch of map inputs (samples x in, without the homogeneous
    /// 1) and output gradients (samples x out) into the running covariances:
    /// `A <- rho A + (1 - rho) E[a a^T]`, and likewise for B. The first call
    /// sets the covariances directly instead of decaying from zero.
    pub fn accumulate(&mut self, inputs: &Matrix, output_grads: &Matrix) -> Result<()> {
        let samples = inputs.rows();
        if samples == 0 || samples != output_grads.rows() {
            return Err(OptimError::DimMismatch(format!(
                "kfac accumulate: {} input rows vs {} grad rows",
                samples,
                output_grads.rows()
            )));
        }
        let a_dim = self.a_cov.rows();
        let expected_in = a_dim - usize::from(self.has_bias);
        if inputs.cols() != expected_in || output_grads.cols() != self.b_cov.rows() {
            return Err(OptimError::DimMismatch(format!(
                "kfac accumulate: got ({}, {}), state is ({}, {})",
                inputs.cols(),
                output_grads.cols(),
                expected_in,
                self.b_cov.rows()
            )));
        }

        let aug = if self.has_bias {
            let mut aug = Matrix::zeros(samples, a_dim);
            for r in 0..samples {
                for c in 0..expected_in {
                    aug.set(r, c, inputs.get(r, c));
                }
                aug.set(r, expected_in, 1.0);
            }
            aug
        } else {
            inputs.clone()
        };

        let mut a_batch = aug.transpose().matmul(&aug)?;
        a_batch.scale(1.0 / samples as f64);
        let mut b_batch = output_grads.transpose().matmul(output_grads)?;
        b_batch.scale(1.0 / samples as f64);

        if !self.initialized {
            self.a_cov = a_batch;
            self.b_cov = b_batch;
            self.initialized = true;
        } else {
            let rho = self.config.stat_decay;
            self.a_cov.scale(rho);
            a_batch.scale(1.0 - rho);
            self.a_cov.add_assign(&a_batch)?;
            self.b_cov.scale(rho);
            b_batch.scale(1.0 - rho);
            self.b_cov.add_assign(&b_batch)?;
        }
        self.a_cov.symmetrize();
        self.b_cov.symmetrize();
        Ok(())
    }

    fn refresh_inverses(&mut self) -> Result<()> {
        let lambda = self.config.damping;
        let a_dim = self.a_cov.rows() as f64;
        let b_dim = self.b_cov.rows() as f64;
        let tr_a = self.a_cov.trace();
        let tr_b = self.b_cov.trace();
        // trace-balancing factor splitting the damping between the sides
        let pi = if tr_a > 0.0 && tr_b > 0.0 {
            ((tr_a / a_dim) / (tr_b / b_dim)).sqrt().clamp(1e-8, 1e8)
        } else {
            1.0
        };
        let sqrt_l = lambda.sqrt();
        self.a_inv = Some(damped_inverse(
            &self.a_cov,
            pi * sqrt_l,
            self.config.min_eig,
            lambda,
        )?);
        self.b_inv = Some(damped_inverse(
            &self.b_cov,
            sqrt_l / pi,
            self.config.min_eig,
            lambda,
        )?);
        self.steps_since_inverse = 0;
        Ok(())
    }

    /// Preconditions a map-layout gradient (out x in_aug):
    /// returns `B_inv * grad * A_inv`, refreshing the damped inverses when
    /// they are stale.
    pub fn precondition(&mut self, grad: &Matrix) -> Result<Matrix> {
        if grad.rows() != self.b_cov.rows() || grad.cols() != self.a_cov.rows() {
            return Err(OptimError::DimMismatch(format!(
                "kfac precondition: grad {}x{}, state ({}, {})",
                grad.rows(),
                grad.cols(),
                self.b_cov.rows(),
                self.a_cov.rows()
            )));
        }
        if self.a_inv.is_none()
            || self.b_inv.is_none()
            || self.steps_since_inverse >= self.config.update_period
        {
            self.refresh_inverses()?;
        }
        self.steps_since_inverse += 1;
        let a_inv = self.a_inv.as_ref().expect("refreshed");
        let b_inv = self.b_inv.as_ref().expect("refreshed");
        Ok(b_inv.matmul(grad)?.matmul(a_inv)?)
    }
}

/// Inverse of `m + shift * I` by symmetric eigendecomposition. With zero
/// damping a rank-deficient factor is an explicit failure; otherwise
/// eigenvalues are floored at `min_eig`.
fn damped_inverse(m: &Matrix, shift: f64, min_eig: f64, damping: f64) -> Result<Matrix> {
    let n = m.rows();
    let (values, vectors) = sym_eig(m)?;
    let mut inv_vals = Vec::with_capacity(n);
    for &v in &values {
        let shifted = v + shift;
        if shifted < min_eig {
            if damping == 0.0 {
                return Err(OptimError::SingularFactor(format!(
                    "eigenvalue {shifted} below {min_eig} with zero damping"
                )));
            }
            inv_vals.push(1.0 / min_eig);
        } else {
            inv_vals.push(1.0 / shifted);
        }
    }
    let mut out = Matrix::zeros(n, n);
    for r in 0..n {
        for c in 0..n {
            let mut acc = 0.0;
            for k in 0..n {
                acc += vectors.get(r, k) * inv_vals[k] * vectors.get(c, k);
            }
            out.set(r, c, acc);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use tensor_core::kronecker;

    fn random_matrix(rows: usize, cols: usize, seed: u64) -> Matrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Matrix::from_fn(rows, cols, |_, _| rng.gen_range(-1.0..1.0))
    }

    fn random_spd(n: usize, seed: u64) -> Matrix {
        let m = random_matrix(n, n, seed);
        let mut spd = m.matmul(&m.transpose()).unwrap();
        for i in 0..n {
            spd.set(i, i, spd.get(i, i) + 0.5);
        }
        spd
    }

    #[test]
    fn first_accumulate_sets_batch_mean() {
        let mut state = KfacLayerState::new(2, 2, false, KfacConfig::default());
        let inputs = Matrix::from_vec(2, 2, vec![1.0, 0.0, 0.0, 2.0]).unwrap();
        let grads = Matrix::from_vec(2, 2, vec![1.0, 1.0, 1.0, 1.0]).unwrap();
        state.accumulate(&inputs, &grads).unwrap();
        // E[a a^T] over the two samples
        assert!((state.a_cov().get(0, 0) - 0.5).abs() < 1e-15);
        assert!((state.a_cov().get(1, 1) - 2.0).abs() < 1e-15);
        assert!((state.a_cov().get(0, 1)).abs() < 1e-15);
    }

    #[test]
    fn repeated_basis_vector_is_fixed_point() {
        let mut state = KfacLayerState::new(3, 1, false, KfacConfig::default());
        let e1 = Matrix::from_vec(1, 3, vec![1.0, 0.0, 0.0]).unwrap();
        let g = Matrix::from_vec(1, 1, vec![1.0]).unwrap();
        for _ in 0..50 {
            state.accumulate(&e1, &g).unwrap();
        }
        for r in 0..3 {
            for c in 0..3 {
                let want = if r == 0 && c == 0 { 1.0 } else { 0.0 };
                assert!((state.a_cov().get(r, c) - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn accumulate_matches_running_average_oracle() {
        let cfg = KfacConfig::default();
        let mut state = KfacLayerState::new(3, 2, false, cfg);
        let mut oracle_a = Matrix::zeros(3, 3);
        let mut first = true;
        for batch in 0..10u64 {
            let inputs = random_matrix(4, 3, 100 + batch);
            let grads = random_matrix(4, 2, 200 + batch);
            state.accumulate(&inputs, &grads).unwrap();
            // explicit loop-computed running average
            let mut mean = Matrix::zeros(3, 3);
            for s in 0..4 {
                for r in 0..3 {
                    for c in 0..3 {
                        let v = mean.get(r, c) + inputs.get(s, r) * inputs.get(s, c) / 4.0;
                        mean.set(r, c, v);
                    }
                }
            }
            if first {
                oracle_a = mean;
                first = false;
            } else {
                for r in 0..3 {
                    for c in 0..3 {
                        let v = cfg.stat_decay * oracle_a.get(r, c)
                            + (1.0 - cfg.stat_decay) * mean.get(r, c);
                        oracle_a.set(r, c, v);
                    }
                }
            }
        }
        assert!(state.a_cov().max_abs_diff(&oracle_a) < 1e-12);
    }

    #[test]
    fn identity_factors_no_damping_is_identity() {
        let mut state = KfacLayerState::with_covariances(
            Matrix::identity(3),
            Matrix::identity(2),
            KfacConfig {
                damping: 0.0,
                ..Default::default()
            },
        );
        let g = random_matrix(2, 3, 7);
        let out = state.precondition(&g).unwrap();
        assert!(out.max_abs_diff(&g) < 1e-12);
    }

    #[test]
    fn factored_apply_matches_dense_kronecker_oracle() {
        for (da, db, seed) in [(4usize, 4usize, 1u64), (3, 5, 2), (6, 6, 3), (2, 6, 4)] {
            let a = random_spd(da, 10 + seed);
            let b = random_spd(db, 20 + seed);
            let cfg = KfacConfig {
                damping: 0.1,
                ..Default::default()
            };
            let mut state = KfacLayerState::with_covariances(a.clone(), b.clone(), cfg);
            let g = random_matrix(db, da, 30 + seed);
            let got = state.precondition(&g).unwrap();

            // dense oracle: unvec((A_damped (x) B_damped)^-1 vec(G)) with
            // column-stacking vec and the same trace-balanced damping
            let pi = ((a.trace() / da as f64) / (b.trace() / db as f64)).sqrt();
            let sqrt_l = cfg.damping.sqrt();
            let mut ad = a.clone();
            for i in 0..da {
                ad.set(i, i, ad.get(i, i) + pi * sqrt_l);
            }
            let mut bd = b.clone();
            for i in 0..db {
                bd.set(i, i, bd.get(i, i) + sqrt_l / pi);
            }
            let k = kronecker(&ad, &bd);
            let k_inv = tensor_core::sym_inverse(&k, 1e-14).unwrap();
            let mut vec_g = vec![0.0; da * db];
            for c in 0..da {
                for r in 0..db {
                    vec_g[c * db + r] = g.get(r, c);
                }
            }
            let vec_out = k_inv.matvec(&vec_g).unwrap();
            let mut expect = Matrix::zeros(db, da);
            for c in 0..da {
                for r in 0..db {
                    expect.set(r, c, vec_out[c * db + r]);
                }
            }
            assert!(
                got.max_abs_diff(&expect) < 1e-8,
                "dims ({da},{db}): {}",
                got.max_abs_diff(&expect)
            );
        }
    }

    #[test]
    fn preconditioned_gradient_is_descent_direction() {
        for seed in 0..20u64 {
            let a = random_spd(4, 40 + seed);
            let b = random_spd(3, 60 + seed);
            let mut state = KfacLayerState::with_covariances(a, b, KfacConfig::default());
            let g = random_matrix(3, 4, 80 + seed);
            let out = state.precondition(&g).unwrap();
            let dot: f64 = out.data().iter().zip(g.data()).map(|(x, y)| x * y).sum();
            assert!(dot > 0.0, "seed {seed}: {dot}");
        }
    }

    #[test]
    fn zero_damping_rank_deficient_fails_explicitly() {
        let singular = Matrix::from_vec(2, 2, vec![1.0, 1.0, 1.0, 1.0]).unwrap();
        let mut state = KfacLayerState::with_covariances(
            singular,
            Matrix::identity(2),
            KfacConfig {
                damping: 0.0,
                ..Default::default()
            },
        );
        let g = Matrix::identity(2);
        assert!(matches!(
            state.precondition(&g),
            Err(OptimError::SingularFactor(_))
        ));
    }

    #[test]
    fn inverses_refresh_on_schedule() {
        let cfg = KfacConfig {
            update_period: 3,
            ..Default::default()
        };
        let mut state = KfacLayerState::new(2, 2, false, cfg);
        let inputs = random_matrix(8, 2, 1);
        let grads = random_matrix(8, 2, 2);
        state.accumulate(&inputs, &grads).unwrap();
        let g = Matrix::identity(2);
        let first = state.precondition(&g).unwrap();
        // shift the statistics; the stale inverse keeps being used until the
        // period elapses
        let inputs2 = random_matrix(8, 2, 3);
        state.accumulate(&inputs2, &grads).unwrap();
        let second = state.precondition(&g).unwrap();
        assert!(first.max_abs_diff(&second) < 1e-15);
        let third = state.precondition(&g).unwrap();
        assert!(first.max_abs_diff(&third) < 1e-15);
        // fourth call crosses the period and refreshes
        let fourth = state.precondition(&g).unwrap();
        assert!(first.max_abs_diff(&fourth) > 1e-12);
    }
}
