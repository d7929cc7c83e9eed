//! Truncated left singular vectors via symmetric eigendecomposition of the
//! Gram matrix. Extents are small, so the Jacobi path in `tensor-core` is
//! both sufficient and deterministic.

use crate::error::Result;
use tensor_core::{sym_eig, Matrix};

/// Leading `k` left singular vectors of `m`, as orthonormal matrix columns.
pub fn leading_left_singular_vectors(m: &Matrix, k: usize) -> Result<Matrix> {
    debug_assert!(k <= m.rows());
    let gram = m.matmul(&m.transpose())?;
    let (_values, vectors) = sym_eig(&gram)?;
    let mut out = Matrix::zeros(m.rows(), k);
    for c in 0..k {
        let col = vectors.column(c);
        out.set_column(c, &col);
    }
    Ok(out)
}

/// Moore-Penrose pseudoinverse of a symmetric PSD matrix, dropping
/// eigenvalues below `rel_cutoff` times the largest.
pub fn sym_pinv(a: &Matrix, rel_cutoff: f64) -> Result<Matrix> {
    let (values, vectors) = sym_eig(a)?;
    let n = values.len();
    let cutoff = values.first().copied().unwrap_or(0.0).max(0.0) * rel_cutoff;
    let mut out = Matrix::zeros(n, n);
    for r in 0..n {
        for c in 0..n {
            let mut acc = 0.0;
            for k in 0..n {
                if values[k] > cutoff && values[k] > 0.0 {
                    acc += vectors.get(r, k) * vectors.get(c, k) / values[k];
                }
            }
            out.set(r, c, acc);
        }
    }
    Ok(out)
}
