//! Tucker decomposition: a small core contracted with one orthonormal factor
//! per mode. Solved by truncated HOSVD refined with higher-order orthogonal
//! iteration.

use crate::error::{DecompError, Result};
use crate::svd::leading_left_singular_vectors;
use tensor_core::{mode_n_product, unfold, DenseTensor, Matrix};

/// Tucker decomposition: `X ~= G x_1 U^(1) x_2 U^(2) ... x_N U^(N)`.
#[derive(Debug, Clone)]
pub struct TuckerDecomposition {
    pub core: DenseTensor,
    pub factors: Vec<Matrix>,
}

impl TuckerDecomposition {
    pub fn ranks(&self) -> &[usize] {
        self.core.shape()
    }

    pub fn shape(&self) -> Vec<usize> {
        self.factors.iter().map(|f| f.rows()).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.factors.len() != self.core.num_modes() {
            return Err(DecompError::Invalid(format!(
                "{} factors for a core with {} modes",
                self.factors.len(),
                self.core.num_modes()
            )));
        }
        for (k, f) in self.factors.iter().enumerate() {
            if f.cols() != self.core.shape()[k] {
                return Err(DecompError::Invalid(format!(
                    "factor {} has {} columns, core extent is {}",
                    k,
                    f.cols(),
                    self.core.shape()[k]
                )));
            }
        }
        Ok(())
    }

    /// Learnable coefficient count: `prod_k R_k + sum_k I_k * R_k`.
    pub fn param_count(&self) -> usize {
        crate::count::tucker_param_count(&self.shape(), self.ranks())
    }
}

/// Applies the factors mode by mode; the application order does not change
/// the result since the modes are distinct.
pub fn tucker_reconstruct(d: &TuckerDecomposition) -> Result<DenseTensor> {
    d.validate()?;
    let mut out = d.core.clone();
    for (mode, f) in d.factors.iter().enumerate() {
        out = mode_n_product(&out, f, mode)?;
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct TuckerOptions {
    pub max_iters: usize,
    pub tol: f64,
}

impl Default for TuckerOptions {
    fn default() -> Self {
        Self {
            max_iters: 200,
            tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TuckerFit {
    pub decomposition: TuckerDecomposition,
    pub rel_error: f64,
    /// Error of the plain truncated-HOSVD initialization, before refinement.
    pub hosvd_rel_error: f64,
    pub sweeps: usize,
}

/// Tucker decomposition at the given per-mode ranks.
pub fn tucker_hooi(x: &DenseTensor, ranks: &[usize], opts: &TuckerOptions) -> Result<TuckerFit> {
    let n_modes = x.num_modes();
    if ranks.len() != n_modes {
        return Err(DecompError::RankCountMismatch {
            expected: n_modes,
            got: ranks.len(),
        });
    }
    for (mode, (&rank, &extent)) in ranks.iter().zip(x.shape()).enumerate() {
        if rank == 0 {
            return Err(DecompError::ZeroRank);
        }
        if rank > extent {
            return Err(DecompError::RankExceedsExtent { mode, rank, extent });
        }
    }

    let x_norm = x.frobenius_norm();

    // HOSVD initialization: leading singular vectors of each unfolding.
    let mut factors: Vec<Matrix> = Vec::with_capacity(n_modes);
    for mode in 0..n_modes {
        let unf = unfold(x, mode)?;
        factors.push(leading_left_singular_vectors(&unf, ranks[mode])?);
    }
    let hosvd_rel_error = rel_error_from_core(x, &factors, x_norm)?;

    let mut prev_err = hosvd_rel_error;
    let mut sweeps = 0;
    for _ in 0..opts.max_iters {
        sweeps += 1;
        for mode in 0..n_modes {
            // project onto every other factor, then refresh this mode
            let mut y = x.clone();
            for (m, f) in factors.iter().enumerate() {
                if m != mode {
                    y = mode_n_product(&y, &f.transpose(), m)?;
                }
            }
            let unf = unfold(&y, mode)?;
            factors[mode] = leading_left_singular_vectors(&unf, ranks[mode])?;
        }
        let err = rel_error_from_core(x, &factors, x_norm)?;
        // relative-fit-change stopping rule
        if (prev_err - err) < opts.tol * prev_err.max(f64::MIN_POSITIVE) {
            prev_err = err.min(prev_err);
            break;
        }
        prev_err = err;
    }

    let core = project_core(x, &factors)?;
    Ok(TuckerFit {
        decomposition: TuckerDecomposition { core, factors },
        rel_error: prev_err,
        hosvd_rel_error,
        sweeps,
    })
}

fn project_core(x: &DenseTensor, factors: &[Matrix]) -> Result<DenseTensor> {
    let mut core = x.clone();
    for (mode, f) in factors.iter().enumerate() {
        core = mode_n_product(&core, &f.transpose(), mode)?;
    }
    Ok(core)
}

/// With orthonormal factors, `|X - X_hat|^2 == |X|^2 - |core|^2`.
fn rel_error_from_core(x: &DenseTensor, factors: &[Matrix], x_norm: f64) -> Result<f64> {
    if x_norm == 0.0 {
        return Ok(0.0);
    }
    let core = project_core(x, factors)?;
    let err_sq = (x_norm * x_norm - core.frobenius_norm().powi(2)).max(0.0);
    Ok(err_sq.sqrt() / x_norm)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use tensor_core::rng::standard_normal;

    fn random_tensor(shape: &[usize], seed: u64) -> DenseTensor {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let len = shape.iter().product();
        let data = (0..len).map(|_| standard_normal(&mut rng)).collect();
        DenseTensor::from_vec(shape.to_vec(), data).unwrap()
    }

    fn planted(shape: &[usize], ranks: &[usize], seed: u64) -> DenseTensor {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let core = random_tensor(ranks, seed + 1);
        let mut out = core;
        for (mode, (&extent, &rank)) in shape.iter().zip(ranks).enumerate() {
            let f = Matrix::random_orthonormal(extent, rank, &mut rng);
            out = mode_n_product(&out, &f, mode).unwrap();
        }
        out
    }

    fn reconstruction_rel_error(x: &DenseTensor, d: &TuckerDecomposition) -> f64 {
        let recon = tucker_reconstruct(d).unwrap();
        let diff: f64 = recon
            .data()
            .iter()
            .zip(x.data())
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        diff.sqrt() / x.frobenius_norm()
    }

    #[test]
    fn full_ranks_reconstruct_exactly() {
        let x = random_tensor(&[4, 3, 5], 10);
        let fit = tucker_hooi(&x, &[4, 3, 5], &TuckerOptions::default()).unwrap();
        assert!(fit.rel_error < 1e-10);
        assert!(reconstruction_rel_error(&x, &fit.decomposition) < 1e-10);
    }

    #[test]
    fn planted_low_rank_instance_recovered() {
        let x = planted(&[6, 6, 6], &[2, 2, 2], 20);
        let fit = tucker_hooi(&x, &[2, 2, 2], &TuckerOptions::default()).unwrap();
        assert!(fit.rel_error < 1e-8, "rel error {}", fit.rel_error);
        assert!(reconstruction_rel_error(&x, &fit.decomposition) < 1e-8);
    }

    #[test]
    fn rank_one_tensor_at_unit_ranks() {
        let x = planted(&[4, 5, 3], &[1, 1, 1], 30);
        let fit = tucker_hooi(&x, &[1, 1, 1], &TuckerOptions::default()).unwrap();
        assert!(fit.rel_error < 1e-10);
    }

    #[test]
    fn factors_have_orthonormal_columns() {
        let x = random_tensor(&[5, 4, 6], 40);
        let fit = tucker_hooi(&x, &[3, 2, 4], &TuckerOptions::default()).unwrap();
        for f in &fit.decomposition.factors {
            let gram = f.transpose().matmul(f).unwrap();
            assert!(gram.max_abs_diff(&Matrix::identity(f.cols())) < 1e-10);
        }
    }

    #[test]
    fn hooi_no_worse_than_hosvd() {
        let x = random_tensor(&[6, 6, 6], 50);
        let fit = tucker_hooi(&x, &[3, 3, 3], &TuckerOptions::default()).unwrap();
        assert!(fit.rel_error <= fit.hosvd_rel_error + 1e-12);
    }

    #[test]
    fn error_non_increasing_in_rank() {
        let x = planted(&[6, 6, 6], &[4, 4, 4], 60);
        let mut prev = f64::INFINITY;
        for r in [2usize, 3, 4] {
            let fit = tucker_hooi(&x, &[r, r, r], &TuckerOptions::default()).unwrap();
            assert!(fit.rel_error <= prev + 1e-10, "rank {r}: {} > {prev}", fit.rel_error);
            prev = fit.rel_error;
        }
    }

    #[test]
    fn reconstruct_identity_factors_is_core() {
        let core = random_tensor(&[3, 4, 2], 70);
        let d = TuckerDecomposition {
            factors: core.shape().iter().map(|&e| Matrix::identity(e)).collect(),
            core: core.clone(),
        };
        let got = tucker_reconstruct(&d).unwrap();
        assert_eq!(got, core);
    }

    #[test]
    fn reconstruct_order_independent() {
        let mut rng = ChaCha8Rng::seed_from_u64(80);
        let core = random_tensor(&[2, 3, 2], 81);
        let factors: Vec<Matrix> = core
            .shape()
            .iter()
            .map(|&r| Matrix::from_fn(r + 2, r, |_, _| standard_normal(&mut rng)))
            .collect();
        let d = TuckerDecomposition {
            core: core.clone(),
            factors: factors.clone(),
        };
        let forward = tucker_reconstruct(&d).unwrap();
        // apply factors in reverse mode order
        let mut rev = core;
        for mode in (0..factors.len()).rev() {
            rev = mode_n_product(&rev, &factors[mode], mode).unwrap();
        }
        assert!(forward.max_abs_diff(&rev).unwrap() < 1e-12);
    }

    #[test]
    fn round_trip_at_full_ranks() {
        let x = random_tensor(&[3, 4, 3], 90);
        let fit = tucker_hooi(&x, &[3, 4, 3], &TuckerOptions::default()).unwrap();
        let recon = tucker_reconstruct(&fit.decomposition).unwrap();
        assert!(recon.max_abs_diff(&x).unwrap() < 1e-10);
    }

    #[test]
    fn rejects_rank_over_extent() {
        let x = random_tensor(&[3, 3], 91);
        let err = tucker_hooi(&x, &[4, 2], &TuckerOptions::default());
        assert!(matches!(err, Err(DecompError::RankExceedsExtent { .. })));
    }
}
