//! Row-major dense matrices and the small-matrix routines the solvers need.

use crate::error::{Result, TensorError};

/// Dense real matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows * cols != data.len() {
            return Err(TensorError::ShapeMismatch(format!(
                "matrix {}x{} needs {} elements, got {}",
                rows,
                cols,
                rows * cols,
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn column(&self, c: usize) -> Vec<f64> {
        (0..self.rows).map(|r| self.get(r, c)).collect()
    }

    pub fn set_column(&mut self, c: usize, v: &[f64]) {
        debug_assert_eq!(v.len(), self.rows);
        for (r, &x) in v.iter().enumerate() {
            self.set(r, c, x);
        }
    }

    pub fn transpose(&self) -> Matrix {
        let mut out = Matrix::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.data[c * self.rows + r] = self.data[r * self.cols + c];
            }
        }
        out
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(TensorError::ShapeMismatch(format!(
                "matmul: {}x{} * {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for r in 0..self.rows {
            let arow = self.row(r);
            let orow = &mut out.data[r * other.cols..(r + 1) * other.cols];
            for (k, &a) in arow.iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                let brow = other.row(k);
                for (o, &b) in orow.iter_mut().zip(brow.iter()) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    pub fn matvec(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.cols {
            return Err(TensorError::ShapeMismatch(format!(
                "matvec: {}x{} * len {}",
                self.rows,
                self.cols,
                v.len()
            )));
        }
        Ok((0..self.rows)
            .map(|r| self.row(r).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect())
    }

    pub fn scale(&mut self, s: f64) {
        for v in &mut self.data {
            *v *= s;
        }
    }

    pub fn add_assign(&mut self, other: &Matrix) -> Result<()> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(TensorError::ShapeMismatch("matrix add".into()));
        }
        for (a, b) in self.data.iter_mut().zip(other.data.iter()) {
            *a += b;
        }
        Ok(())
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn trace(&self) -> f64 {
        let n = self.rows.min(self.cols);
        (0..n).map(|i| self.get(i, i)).sum()
    }

    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        debug_assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(other.data.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Averages the matrix with its transpose in place; square only.
    pub fn symmetrize(&mut self) {
        debug_assert_eq!(self.rows, self.cols);
        let n = self.rows;
        for r in 0..n {
            for c in (r + 1)..n {
                let m = 0.5 * (self.get(r, c) + self.get(c, r));
                self.set(r, c, m);
                self.set(c, r, m);
            }
        }
    }
}

impl Matrix {
    /// Random matrix with orthonormal columns: Gaussian entries followed by
    /// modified Gram-Schmidt. Requires `cols <= rows`.
    pub fn random_orthonormal<R: rand::Rng>(rows: usize, cols: usize, rng: &mut R) -> Matrix {
        assert!(cols <= rows, "orthonormal columns need cols <= rows");
        let mut m = Matrix::from_fn(rows, cols, |_, _| crate::rng::standard_normal(rng));
        for c in 0..cols {
            let mut col = m.column(c);
            for prev in 0..c {
                let p = m.column(prev);
                let dot: f64 = col.iter().zip(&p).map(|(a, b)| a * b).sum();
                for (x, y) in col.iter_mut().zip(&p) {
                    *x -= dot * y;
                }
            }
            let norm: f64 = col.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm < 1e-12 {
                // regenerate a degenerate direction deterministically
                for (i, x) in col.iter_mut().enumerate() {
                    *x = if i == c % rows { 1.0 } else { 0.0 };
                }
            } else {
                for x in &mut col {
                    *x /= norm;
                }
            }
            m.set_column(c, &col);
        }
        m
    }
}

/// Kronecker product with the standard block layout:
/// `out[i*p + k, j*q + l] = a[i,j] * b[k,l]` for `b` of size `p x q`.
pub fn kronecker(a: &Matrix, b: &Matrix) -> Matrix {
    let (p, q) = (b.rows(), b.cols());
    let mut out = Matrix::zeros(a.rows() * p, a.cols() * q);
    for i in 0..a.rows() {
        for j in 0..a.cols() {
            let av = a.get(i, j);
            if av == 0.0 {
                continue;
            }
            for k in 0..p {
                for l in 0..q {
                    out.set(i * p + k, j * q + l, av * b.get(k, l));
                }
            }
        }
    }
    out
}

/// Eigendecomposition of a symmetric matrix via cyclic Jacobi rotations.
///
/// Returns eigenvalues in descending order and the matching eigenvectors as
/// matrix columns. Deterministic: fixed sweep order, fixed sign convention
/// (largest-magnitude entry of each eigenvector made positive).
pub fn sym_eig(a: &Matrix) -> Result<(Vec<f64>, Matrix)> {
    if a.rows() != a.cols() {
        return Err(TensorError::ShapeMismatch(format!(
            "sym_eig needs square input, got {}x{}",
            a.rows(),
            a.cols()
        )));
    }
    let n = a.rows();
    let mut m = a.clone();
    m.symmetrize();
    let mut v = Matrix::identity(n);

    let norm = m.frobenius_norm();
    let tol = 1e-14 * norm.max(1.0);
    for _sweep in 0..100 {
        let mut off = 0.0;
        for r in 0..n {
            for c in (r + 1)..n {
                off += m.get(r, c).powi(2);
            }
        }
        if off.sqrt() <= tol {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m.get(p, q);
                if apq.abs() <= tol * 1e-2 {
                    continue;
                }
                let app = m.get(p, p);
                let aqq = m.get(q, q);
                let theta = 0.5 * (aqq - app) / apq;
                let t = if theta >= 0.0 {
                    1.0 / (theta + (1.0 + theta * theta).sqrt())
                } else {
                    1.0 / (theta - (1.0 + theta * theta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                // rotate rows/cols p,q of m
                for k in 0..n {
                    let mkp = m.get(k, p);
                    let mkq = m.get(k, q);
                    m.set(k, p, c * mkp - s * mkq);
                    m.set(k, q, s * mkp + c * mkq);
                }
                for k in 0..n {
                    let mpk = m.get(p, k);
                    let mqk = m.get(q, k);
                    m.set(p, k, c * mpk - s * mqk);
                    m.set(q, k, s * mpk + c * mqk);
                }
                for k in 0..n {
                    let vkp = v.get(k, p);
                    let vkq = v.get(k, q);
                    v.set(k, p, c * vkp - s * vkq);
                    v.set(k, q, s * vkp + c * vkq);
                }
            }
        }
    }

    let mut pairs: Vec<(f64, Vec<f64>)> = (0..n).map(|i| (m.get(i, i), v.column(i))).collect();
    pairs.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());

    let mut values = Vec::with_capacity(n);
    let mut vectors = Matrix::zeros(n, n);
    for (i, (val, mut vec)) in pairs.into_iter().enumerate() {
        // sign convention for run-to-run determinism
        let mut max_abs = 0.0;
        let mut sign = 1.0;
        for &x in &vec {
            if x.abs() > max_abs {
                max_abs = x.abs();
                sign = if x >= 0.0 { 1.0 } else { -1.0 };
            }
        }
        if sign < 0.0 {
            for x in &mut vec {
                *x = -*x;
            }
        }
        values.push(val);
        vectors.set_column(i, &vec);
    }
    Ok((values, vectors))
}

/// Inverse of a symmetric positive definite matrix via [`sym_eig`], flooring
/// eigenvalues at `min_eig`. Errors when an eigenvalue falls below the floor
/// and no damping is allowed (`min_eig <= 0`).
pub fn sym_inverse(a: &Matrix, min_eig: f64) -> Result<Matrix> {
    let (values, vectors) = sym_eig(a)?;
    let n = values.len();
    let mut inv_vals = Vec::with_capacity(n);
    for &val in &values {
        if val < min_eig || (min_eig <= 0.0 && val <= 0.0) {
            if min_eig <= 0.0 {
                return Err(TensorError::ShapeMismatch(format!(
                    "singular matrix: eigenvalue {val} not invertible"
                )));
            }
            inv_vals.push(1.0 / min_eig);
        } else {
            inv_vals.push(1.0 / val);
        }
    }
    // V diag(1/l) V^T
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
