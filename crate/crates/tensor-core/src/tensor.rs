//! Dense N-dimensional tensors with row-major storage.
//!
//! All arithmetic accumulates in f64. The `Dtype` tag only selects the
//! on-disk element width; in memory every tensor holds f64 data.

use crate::error::{Result, TensorError};
use crate::matrix::Matrix;

/// On-disk element type. In-memory data is always f64.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dtype {
    F64,
    F32,
}

/// Dense real tensor. Row-major: the last index varies fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseTensor {
    shape: Vec<usize>,
    data: Vec<f64>,
    dtype: Dtype,
}

impl DenseTensor {
    /// Builds a tensor from a shape and flat row-major data.
    pub fn from_vec(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        if shape.is_empty() {
            return Err(TensorError::InvalidShape(
                "tensor must have at least one mode".into(),
            ));
        }
        if shape.iter().any(|&e| e == 0) {
            return Err(TensorError::InvalidShape(format!(
                "zero extent in shape {shape:?}"
            )));
        }
        let len: usize = shape.iter().product();
        if len != data.len() {
            return Err(TensorError::ShapeMismatch(format!(
                "shape {:?} needs {} elements, got {}",
                shape,
                len,
                data.len()
            )));
        }
        Ok(Self {
            shape,
            data,
            dtype: Dtype::F64,
        })
    }

    pub fn zeros(shape: Vec<usize>) -> Result<Self> {
        let len: usize = shape.iter().product();
        Self::from_vec(shape, vec![0.0; len])
    }

    /// Scalar wrapped as a one-element tensor of shape `[1]`.
    pub fn scalar(value: f64) -> Self {
        Self {
            shape: vec![1],
            data: vec![value],
            dtype: Dtype::F64,
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn num_modes(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
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

    pub fn dtype(&self) -> Dtype {
        self.dtype
    }

    pub fn with_dtype(mut self, dtype: Dtype) -> Self {
        self.dtype = dtype;
        self
    }

    /// Row-major strides: `stride[N-1] == 1`.
    pub fn strides(&self) -> Vec<usize> {
        strides_of(&self.shape)
    }

    /// Flat offset of a multi-index.
    pub fn offset(&self, index: &[usize]) -> usize {
        debug_assert_eq!(index.len(), self.shape.len());
        let mut off = 0;
        for (k, &i) in index.iter().enumerate() {
            debug_assert!(i < self.shape[k]);
            off = off * self.shape[k] + i;
        }
        off
    }

    pub fn get(&self, index: &[usize]) -> f64 {
        self.data[self.offset(index)]
    }

    pub fn set(&mut self, index: &[usize], value: f64) {
        let off = self.offset(index);
        self.data[off] = value;
    }

    /// Reinterprets the data under a new shape with the same element count.
    pub fn reshape(mut self, shape: Vec<usize>) -> Result<Self> {
        let len: usize = shape.iter().product();
        if shape.is_empty() || len != self.data.len() {
            return Err(TensorError::ShapeMismatch(format!(
                "cannot reshape {} elements into {:?}",
                self.data.len(),
                shape
            )));
        }
        self.shape = shape;
        Ok(self)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn scale(&mut self, s: f64) {
        for v in &mut self.data {
            *v *= s;
        }
    }

    pub fn add_assign(&mut self, other: &DenseTensor) -> Result<()> {
        if self.shape != other.shape {
            return Err(TensorError::ShapeMismatch(format!(
                "add: {:?} vs {:?}",
                self.shape, other.shape
            )));
        }
        for (a, b) in self.data.iter_mut().zip(other.data.iter()) {
            *a += b;
        }
        Ok(())
    }

    /// Largest absolute elementwise difference; shapes must match.
    pub fn max_abs_diff(&self, other: &DenseTensor) -> Result<f64> {
        if self.shape != other.shape {
            return Err(TensorError::ShapeMismatch(format!(
                "diff: {:?} vs {:?}",
                self.shape, other.shape
            )));
        }
        Ok(self
            .data
            .iter()
            .zip(other.data.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }

    /// Iterates multi-indices in row-major order.
    pub fn indices(&self) -> IndexIter {
        IndexIter::new(self.shape.clone())
    }
}

pub(crate) fn strides_of(shape: &[usize]) -> Vec<usize> {
    let n = shape.len();
    let mut strides = vec![1usize; n];
    for k in (0..n.saturating_sub(1)).rev() {
        strides[k] = strides[k + 1] * shape[k + 1];
    }
    strides
}

/// Row-major multi-index iterator over a shape.
pub struct IndexIter {
    shape: Vec<usize>,
    next: Option<Vec<usize>>,
}

impl IndexIter {
    pub fn new(shape: Vec<usize>) -> Self {
        let next = if shape.iter().any(|&e| e == 0) {
            None
        } else {
            Some(vec![0; shape.len()])
        };
        Self { shape, next }
    }
}

impl Iterator for IndexIter {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        let current = self.next.clone()?;
        // advance
        let mut idx = current.clone();
        let mut k = idx.len();
        loop {
            if k == 0 {
                self.next = None;
                break;
            }
            k -= 1;
            idx[k] += 1;
            if idx[k] < self.shape[k] {
                self.next = Some(idx);
                break;
            }
            idx[k] = 0;
        }
        Some(current)
    }
}

/// Mode-`mode` unfolding (0-based). Rows run over the unfolded mode; columns
/// enumerate the remaining indices lexicographically by original position.
pub fn unfold(x: &DenseTensor, mode: usize) -> Result<Matrix> {
    let n = x.num_modes();
    if mode >= n {
        return Err(TensorError::ModeOutOfRange { mode, modes: n });
    }
    let rows = x.shape()[mode];
    let cols: usize = x
        .shape()
        .iter()
        .enumerate()
        .filter(|&(k, _)| k != mode)
        .map(|(_, &e)| e)
        .product();

    let mut out = vec![0.0; rows * cols];
    // Walk the tensor in row-major order, tracking the column index of the
    // remaining modes directly.
    let shape = x.shape().to_vec();
    let mut idx = vec![0usize; n];
    for &v in x.data() {
        let r = idx[mode];
        let mut c = 0usize;
        for (k, &i) in idx.iter().enumerate() {
            if k != mode {
                c = c * shape[k] + i;
            }
        }
        out[r * cols + c] = v;
        // advance row-major
        let mut k = n;
        while k > 0 {
            k -= 1;
            idx[k] += 1;
            if idx[k] < shape[k] {
                break;
            }
            idx[k] = 0;
        }
    }
    Matrix::from_vec(rows, cols, out)
}

/// Inverse of [`unfold`]: `fold(unfold(x, m), m, x.shape()) == x` exactly.
pub fn fold(m: &Matrix, mode: usize, shape: &[usize]) -> Result<DenseTensor> {
    let n = shape.len();
    if mode >= n {
        return Err(TensorError::ModeOutOfRange { mode, modes: n });
    }
    let rows = shape[mode];
    let cols: usize = shape
        .iter()
        .enumerate()
        .filter(|&(k, _)| k != mode)
        .map(|(_, &e)| e)
        .product();
    if m.rows() != rows || m.cols() != cols {
        return Err(TensorError::ShapeMismatch(format!(
            "fold: matrix {}x{} inconsistent with shape {:?} at mode {}",
            m.rows(),
            m.cols(),
            shape,
            mode
        )));
    }

    let mut out = DenseTensor::zeros(shape.to_vec())?;
    let mut idx = vec![0usize; n];
    let total = out.len();
    let data = out.data_mut();
    for flat in 0..total {
        let r = idx[mode];
        let mut c = 0usize;
        for (k, &i) in idx.iter().enumerate() {
            if k != mode {
                c = c * shape[k] + i;
            }
        }
        data[flat] = m.data()[r * cols + c];
        let mut k = n;
        while k > 0 {
            k -= 1;
            idx[k] += 1;
            if idx[k] < shape[k] {
                break;
            }
            idx[k] = 0;
        }
    }
    Ok(out)
}

/// Mode-n product `x ×_mode u`: replaces extent `I_mode` with `u.rows`.
///
/// Equals `fold(u · unfold(x, mode), mode, new_shape)`.
pub fn mode_n_product(x: &DenseTensor, u: &Matrix, mode: usize) -> Result<DenseTensor> {
    let n = x.num_modes();
    if mode >= n {
        return Err(TensorError::ModeOutOfRange { mode, modes: n });
    }
    if u.cols() != x.shape()[mode] {
        return Err(TensorError::ShapeMismatch(format!(
            "mode product: factor has {} cols, mode {} extent is {}",
            u.cols(),
            mode,
            x.shape()[mode]
        )));
    }
    let unfolded = unfold(x, mode)?;
    let product = u.matmul(&unfolded)?;
    let mut new_shape = x.shape().to_vec();
    new_shape[mode] = u.rows();
    fold(&product, mode, &new_shape)
}

/// Generalized inner product: contracts the last `n` modes of `x` against the
/// first `n` modes of `y`. Full contraction yields a shape-`[1]` scalar tensor.
pub fn generalized_inner_product(
    x: &DenseTensor,
    y: &DenseTensor,
    n: usize,
) -> Result<DenseTensor> {
    if n == 0 || n > x.num_modes() || n > y.num_modes() {
        return Err(TensorError::ShapeMismatch(format!(
            "cannot contract {} modes of {:?} with {:?}",
            n,
            x.shape(),
            y.shape()
        )));
    }
    let lead = &x.shape()[..x.num_modes() - n];
    let contract = &x.shape()[x.num_modes() - n..];
    let y_contract = &y.shape()[..n];
    let trail = &y.shape()[n..];
    if contract != y_contract {
        return Err(TensorError::ShapeMismatch(format!(
            "contracted modes differ: {contract:?} vs {y_contract:?}"
        )));
    }

    let lead_len: usize = lead.iter().product();
    let mid_len: usize = contract.iter().product();
    let trail_len: usize = trail.iter().product();

    // Row-major layout makes this a plain (lead x mid) * (mid x trail) matmul.
    let mut out = vec![0.0; lead_len * trail_len];
    for a in 0..lead_len {
        for m in 0..mid_len {
            let xv = x.data()[a * mid_len + m];
            if xv == 0.0 {
                continue;
            }
            let yrow = &y.data()[m * trail_len..(m + 1) * trail_len];
            let orow = &mut out[a * trail_len..(a + 1) * trail_len];
            for (o, &yv) in orow.iter_mut().zip(yrow.iter()) {
                *o += xv * yv;
            }
        }
    }

    let mut shape: Vec<usize> = lead.iter().chain(trail.iter()).copied().collect();
    if shape.is_empty() {
        shape.push(1);
    }
    DenseTensor::from_vec(shape, out)
}

/// Outer product of one or more vectors: entry `(i_1..i_N)` is the product of
/// the vector entries at those positions.
pub fn outer_product(vectors: &[&[f64]]) -> Result<DenseTensor> {
    if vectors.is_empty() {
        return Err(TensorError::EmptyInput("outer product of no vectors".into()));
    }
    if vectors.iter().any(|v| v.is_empty()) {
        return Err(TensorError::EmptyInput("outer product with empty vector".into()));
    }
    let shape: Vec<usize> = vectors.iter().map(|v| v.len()).collect();
    let mut out = vec![1.0f64; shape.iter().product()];
    let strides = strides_of(&shape);
    for (k, vec_k) in vectors.iter().enumerate() {
        let stride = strides[k];
        let extent = shape[k];
        let block = stride * extent;
        for (flat, o) in out.iter_mut().enumerate() {
            let i = (flat % block) / stride;
            *o *= vec_k[i];
        }
    }
    DenseTensor::from_vec(shape, out)
}
