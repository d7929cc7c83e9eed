//! Learnable parameters and the per-map statistics captured for second-order
//! preconditioning.

use tensor_core::{DenseTensor, Matrix};

/// Dense index of a parameter within its network. Stable across clones, so a
/// target network's parameters line up with the online network's.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ParamId(pub usize);

/// A value tensor with its gradient accumulator.
#[derive(Debug, Clone)]
pub struct Parameter {
    pub name: String,
    pub value: DenseTensor,
    pub grad: DenseTensor,
    pub id: ParamId,
}

impl Parameter {
    pub fn new(name: impl Into<String>, value: DenseTensor) -> Self {
        let grad = DenseTensor::zeros(value.shape().to_vec()).expect("valid shape");
        Self {
            name: name.into(),
            value,
            grad,
            id: ParamId(usize::MAX),
        }
    }

    pub fn zero_grad(&mut self) {
        for g in self.grad.data_mut() {
            *g = 0.0;
        }
    }
}

/// How a parameter's gradient maps onto the weight matrix of the linear map
/// it implements.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MapKind {
    /// Parameter shape (out, in); the map matrix is the parameter itself.
    DenseLike,
    /// Parameter shape (in, out); the map matrix is the transpose.
    TransposedFactor,
    /// N-mode core; the map matrix is the unfolding along the last mode.
    CoreLastMode,
}

/// Input activations and output gradients of one linear map, captured during
/// a backward pass for Kronecker-factored curvature estimates.
#[derive(Debug, Clone)]
pub struct LinearMapStats {
    pub weight: ParamId,
    pub bias: Option<ParamId>,
    pub kind: MapKind,
    /// One row per sample: map inputs, without the homogeneous 1.
    pub inputs: Matrix,
    /// One row per sample: gradients at the map output.
    pub output_grads: Matrix,
}

impl LinearMapStats {
    pub fn in_dim(&self) -> usize {
        self.inputs.cols()
    }

    pub fn out_dim(&self) -> usize {
        self.output_grads.cols()
    }

    /// Gradient in map layout: (out, in), with the bias gradient appended as
    /// a final column when the map carries one.
    pub fn map_grad(&self, weight: &Parameter, bias: Option<&Parameter>) -> Matrix {
        let base = match self.kind {
            MapKind::DenseLike => {
                Matrix::from_vec(self.out_dim(), self.in_dim(), weight.grad.data().to_vec())
                    .expect("dense grad layout")
            }
            MapKind::TransposedFactor => {
                Matrix::from_vec(self.in_dim(), self.out_dim(), weight.grad.data().to_vec())
                    .expect("factor grad layout")
                    .transpose()
            }
            MapKind::CoreLastMode => {
                let last = weight.grad.num_modes() - 1;
                tensor_core::unfold(&weight.grad, last).expect("core unfold")
            }
        };
        match bias {
            None => base,
            Some(b) => {
                let mut with_bias = Matrix::zeros(base.rows(), base.cols() + 1);
                for r in 0..base.rows() {
                    for c in 0..base.cols() {
                        with_bias.set(r, c, base.get(r, c));
                    }
                    with_bias.set(r, base.cols(), b.grad.data()[r]);
                }
                with_bias
            }
        }
    }

    /// Writes a map-layout gradient back into the parameter gradient slots.
    pub fn store_map_grad(
        &self,
        grad: &Matrix,
        weight: &mut Parameter,
        bias: Option<&mut Parameter>,
    ) {
        let (core_cols, bias_col) = if self.bias.is_some() {
            (grad.cols() - 1, true)
        } else {
            (grad.cols(), false)
        };
        match self.kind {
            MapKind::DenseLike => {
                for r in 0..grad.rows() {
                    for c in 0..core_cols {
                        weight.grad.data_mut()[r * core_cols + c] = grad.get(r, c);
                    }
                }
            }
            MapKind::TransposedFactor => {
                // param shape (in, out) == (core_cols, rows)
                for r in 0..grad.rows() {
                    for c in 0..core_cols {
                        weight.grad.data_mut()[c * grad.rows() + r] = grad.get(r, c);
                    }
                }
            }
            MapKind::CoreLastMode => {
                let last = weight.grad.num_modes() - 1;
                let shape = weight.grad.shape().to_vec();
                let mut trimmed = Matrix::zeros(grad.rows(), core_cols);
                for r in 0..grad.rows() {
                    for c in 0..core_cols {
                        trimmed.set(r, c, grad.get(r, c));
                    }
                }
                let folded = tensor_core::fold(&trimmed, last, &shape).expect("core fold");
                weight.grad = folded;
            }
        }
        if bias_col {
            if let Some(b) = bias {
                for (r, g) in b.grad.data_mut().iter_mut().enumerate() {
                    *g = grad.get(r, grad.cols() - 1);
                }
            }
        }
    }
}
