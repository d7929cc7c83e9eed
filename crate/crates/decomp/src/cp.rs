//! Canonical-Polyadic decomposition: weighted sums of rank-1 outer products,
//! fitted by alternating least squares with random restarts.

use crate::error::{DecompError, Result};
use crate::svd::sym_pinv;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tensor_core::rng::{derive_seed, standard_normal};
use tensor_core::{outer_product, unfold, DenseTensor, Matrix};

/// CP decomposition: `X = sum_r weights[r] * u_r^(1) o ... o u_r^(N)`.
///
/// Factor columns are unit-norm; the norms live in `weights`.
#[derive(Debug, Clone)]
pub struct CPDecomposition {
    pub weights: Vec<f64>,
    pub factors: Vec<Matrix>,
}

impl CPDecomposition {
    pub fn rank(&self) -> usize {
        self.weights.len()
    }

    pub fn shape(&self) -> Vec<usize> {
        self.factors.iter().map(|f| f.rows()).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let r = self.rank();
        if r == 0 {
            return Err(DecompError::ZeroRank);
        }
        for f in &self.factors {
            if f.cols() != r {
                return Err(DecompError::Invalid(format!(
                    "factor has {} columns, rank is {}",
                    f.cols(),
                    r
                )));
            }
        }
        Ok(())
    }

    /// Learnable coefficient count: `R * (1 + sum_k I_k)`.
    pub fn param_count(&self) -> usize {
        crate::count::cp_param_count(&self.shape(), self.rank())
    }
}

/// Rebuilds the dense tensor from a CP decomposition.
pub fn cp_reconstruct(d: &CPDecomposition) -> Result<DenseTensor> {
    d.validate()?;
    let shape = d.shape();
    let mut out = DenseTensor::zeros(shape)?;
    for r in 0..d.rank() {
        let cols: Vec<Vec<f64>> = d.factors.iter().map(|f| f.column(r)).collect();
        let views: Vec<&[f64]> = cols.iter().map(|c| c.as_slice()).collect();
        let mut term = outer_product(&views)?;
        term.scale(d.weights[r]);
        out.add_assign(&term)?;
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct CpOptions {
    pub max_iters: usize,
    pub tol: f64,
    pub restarts: usize,
    pub seed: u64,
}

impl Default for CpOptions {
    fn default() -> Self {
        Self {
            max_iters: 200,
            tol: 1e-8,
            restarts: 3,
            seed: 0,
        }
    }
}

/// Fitted decomposition plus the per-sweep relative-error trace of the
/// winning restart.
#[derive(Debug, Clone)]
pub struct CpFit {
    pub decomposition: CPDecomposition,
    pub rel_error: f64,
    pub error_history: Vec<f64>,
}

/// Fits a rank-`rank` CP model by ALS, keeping the best of
/// `opts.restarts` random initializations.
pub fn cp_als(x: &DenseTensor, rank: usize, opts: &CpOptions) -> Result<CpFit> {
    if rank == 0 {
        return Err(DecompError::ZeroRank);
    }
    if x.num_modes() < 2 {
        return Err(DecompError::TooFewModes(x.num_modes()));
    }

    let x_norm = x.frobenius_norm();
    if x_norm == 0.0 {
        // Degenerate input: zero weights, canonical unit factors, error 0.
        let factors = x
            .shape()
            .iter()
            .map(|&extent| Matrix::from_fn(extent, rank, |r, c| if r == c % extent { 1.0 } else { 0.0 }))
            .collect();
        return Ok(CpFit {
            decomposition: CPDecomposition {
                weights: vec![0.0; rank],
                factors,
            },
            rel_error: 0.0,
            error_history: vec![0.0],
        });
    }

    let unfoldings: Vec<Matrix> = (0..x.num_modes())
        .map(|mode| unfold(x, mode))
        .collect::<tensor_core::Result<_>>()?;

    let mut best: Option<CpFit> = None;
    for restart in 0..opts.restarts.max(1) {
        let fit = als_single(x, &unfoldings, rank, opts, derive_seed(opts.seed, restart as u64))?;
        let better = match &best {
            None => true,
            Some(b) => fit.rel_error < b.rel_error,
        };
        if better {
            best = Some(fit);
        }
    }
    Ok(best.expect("at least one restart"))
}

fn als_single(
    x: &DenseTensor,
    unfoldings: &[Matrix],
    rank: usize,
    opts: &CpOptions,
    seed: u64,
) -> Result<CpFit> {
    let n_modes = x.num_modes();
    let x_norm = x.frobenius_norm();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // i.i.d. standard normal entries, column-normalized
    let mut factors: Vec<Matrix> = Vec::with_capacity(n_modes);
    for &extent in x.shape() {
        let mut f = Matrix::from_fn(extent, rank, |_, _| standard_normal(&mut rng));
        normalize_columns(&mut f);
        factors.push(f);
    }
    let mut weights = vec![1.0; rank];

    let mut history = Vec::new();
    let mut prev_err = f64::INFINITY;
    for _sweep in 0..opts.max_iters {
        for mode in 0..n_modes {
            let kr = khatri_rao_skip(&factors, mode)?;
            let mttkrp = unfoldings[mode].matmul(&kr)?;
            let mut gram = Matrix::from_fn(rank, rank, |_, _| 1.0);
            for (k, f) in factors.iter().enumerate() {
                if k == mode {
                    continue;
                }
                let g = f.transpose().matmul(f)?;
                for (gv, fv) in gram.data_mut().iter_mut().zip(g.data()) {
                    *gv *= fv;
                }
            }
            let pinv = sym_pinv(&gram, 1e-12)?;
            let mut updated = mttkrp.matmul(&pinv)?;
            weights = normalize_columns(&mut updated);
            factors[mode] = updated;
        }

        let d = CPDecomposition {
            weights: weights.clone(),
            factors: factors.clone(),
        };
        let recon = cp_reconstruct(&d)?;
        let mut diff_sq = 0.0;
        for (a, b) in x.data().iter().zip(recon.data()) {
            diff_sq += (a - b) * (a - b);
        }
        let err = diff_sq.sqrt() / x_norm;
        debug_assert!(
            err <= prev_err + 1e-10 * (1.0 + prev_err.min(1e6)),
            "ALS error increased: {prev_err} -> {err}"
        );
        history.push(err);
        // relative-fit-change stopping rule
        if prev_err.is_finite() && (prev_err - err) < opts.tol * prev_err.max(f64::MIN_POSITIVE) {
            prev_err = err;
            break;
        }
        prev_err = err;
    }

    Ok(CpFit {
        rel_error: prev_err,
        decomposition: CPDecomposition { weights, factors },
        error_history: history,
    })
}

/// Column norms are returned and the columns scaled to unit length.
/// Zero columns get a canonical basis vector and weight zero.
fn normalize_columns(m: &mut Matrix) -> Vec<f64> {
    let mut norms = Vec::with_capacity(m.cols());
    for c in 0..m.cols() {
        let col = m.column(c);
        let norm: f64 = col.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm < 1e-300 {
            let rows = m.rows();
            let mut unit = vec![0.0; rows];
            unit[c % rows] = 1.0;
            m.set_column(c, &unit);
            norms.push(0.0);
        } else {
            let scaled: Vec<f64> = col.iter().map(|v| v / norm).collect();
            m.set_column(c, &scaled);
            norms.push(norm);
        }
    }
    norms
}

/// Column-wise Khatri-Rao product of every factor except `skip`, with the
/// lowest-position factor varying slowest. This matches the unfolding
/// convention in `tensor-core` (remaining modes lexicographic by position).
fn khatri_rao_skip(factors: &[Matrix], skip: usize) -> Result<Matrix> {
    let rank = factors[0].cols();
    let mut acc: Option<Matrix> = None;
    for (k, f) in factors.iter().enumerate() {
        if k == skip {
            continue;
        }
        acc = Some(match acc {
            None => f.clone(),
            Some(prev) => {
                let mut out = Matrix::zeros(prev.rows() * f.rows(), rank);
                for r in 0..rank {
                    for i in 0..prev.rows() {
                        let pv = prev.get(i, r);
                        for j in 0..f.rows() {
                            out.set(i * f.rows() + j, r, pv * f.get(j, r));
                        }
                    }
                }
                out
            }
        });
    }
    acc.ok_or_else(|| DecompError::Invalid("khatri-rao over no factors".into()))
}
