//! Synthetic Kronecker-structured quadratic used to benchmark the
//! optimizers: `loss(W) = 1/2 vec(W)^T (A (x) B) vec(W)` with SPD factors,
//! so the gradient is `B W A` and exact curvature statistics are available
//! in closed form.

use tensor_core::rng::standard_normal;
use tensor_core::Matrix;

pub struct KroneckerQuadratic {
    pub a: Matrix,
    pub b: Matrix,
}

impl KroneckerQuadratic {
    /// Random SPD factors with eigenvalues spread enough that plain gradient
    /// descent at unit step diverges.
    pub fn random(dim_a: usize, dim_b: usize, seed: u64) -> Self {
        let mut rng = rand_seed(seed);
        let mk = |n: usize, rng: &mut rand_chacha::ChaCha8Rng| {
            let m = Matrix::from_fn(n, n, |_, _| standard_normal(rng));
            let mut spd = m.matmul(&m.transpose()).expect("square");
            for i in 0..n {
                spd.set(i, i, spd.get(i, i) + 0.3);
            }
            spd
        };
        Self {
            a: mk(dim_a, &mut rng),
            b: mk(dim_b, &mut rng),
        }
    }

    pub fn random_start(&self, seed: u64) -> Matrix {
        let mut rng = rand_seed(seed);
        Matrix::from_fn(self.b.rows(), self.a.rows(), |_, _| standard_normal(&mut rng))
    }

    pub fn loss(&self, w: &Matrix) -> f64 {
        // 1/2 <W, B W A>
        let g = self.gradient(w);
        0.5 * w.data().iter().zip(g.data()).map(|(x, y)| x * y).sum::<f64>()
    }

    pub fn gradient(&self, w: &Matrix) -> Matrix {
        self.b
            .matmul(w)
            .expect("dims")
            .matmul(&self.a)
            .expect("dims")
    }
}

fn rand_seed(seed: u64) -> rand_chacha::ChaCha8Rng {
    use rand_chacha::rand_core::SeedableRng;
    rand_chacha::ChaCha8Rng::seed_from_u64(seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kfac::{KfacConfig, KfacLayerState};

    #[test]
    fn kfac_with_exact_statistics_converges_in_two_steps() {
        let quad = KroneckerQuadratic::random(8, 8, 5);
        let mut state = KfacLayerState::with_covariances(
            quad.a.clone(),
            quad.b.clone(),
            KfacConfig {
                damping: 0.0,
                ..Default::default()
            },
        );
        let mut w = quad.random_start(6);
        let eta = 1.0;
        let mut losses = Vec::new();
        for _ in 0..2 {
            let g = quad.gradient(&w);
            let p = state.precondition(&g).unwrap();
            for (wv, pv) in w.data_mut().iter_mut().zip(p.data()) {
                *wv -= eta * pv;
            }
            losses.push(quad.loss(&w));
        }
        assert!(
            losses.iter().any(|&l| l < 1e-10),
            "kfac losses {losses:?}"
        );
    }

    #[test]
    fn gradient_descent_at_same_rate_fails_in_100_steps() {
        let quad = KroneckerQuadratic::random(8, 8, 5);
        let mut w = quad.random_start(6);
        let eta = 1.0;
        let mut reached = false;
        for _ in 0..100 {
            let g = quad.gradient(&w);
            for (wv, gv) in w.data_mut().iter_mut().zip(g.data()) {
                *wv -= eta * gv;
            }
            let l = quad.loss(&w);
            if !l.is_finite() {
                break;
            }
            if l < 1e-10 {
                reached = true;
                break;
            }
        }
        assert!(!reached, "plain gradient descent should not reach 1e-10");
    }
}
