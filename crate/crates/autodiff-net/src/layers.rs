//! The layer zoo. Each layer exposes a pure `forward` returning the output
//! plus a cache, and a `backward` that consumes the cache, accumulates
//! parameter gradients and returns the input gradient.

use crate::error::{shape_err, Result};
use crate::param::{LinearMapStats, MapKind, Parameter};
use tensor_core::{fold, generalized_inner_product, unfold, DenseTensor, Matrix};

pub(crate) fn as_matrix(t: &DenseTensor) -> Matrix {
    debug_assert_eq!(t.num_modes(), 2);
    Matrix::from_vec(t.shape()[0], t.shape()[1], t.data().to_vec()).expect("2-mode tensor")
}

pub(crate) fn matrix_tensor(m: &Matrix) -> DenseTensor {
    DenseTensor::from_vec(vec![m.rows(), m.cols()], m.data().to_vec()).expect("matrix tensor")
}

fn flatten_batch(x: &DenseTensor) -> (usize, usize, Matrix) {
    let batch = x.shape()[0];
    let features: usize = x.shape()[1..].iter().product();
    let m = Matrix::from_vec(batch, features, x.data().to_vec()).expect("batch flatten");
    (batch, features, m)
}

/// Fully connected layer: `y = x W^T + b`, weight shape (out, in).
#[derive(Debug, Clone)]
pub struct Dense {
    pub weight: Parameter,
    pub bias: Parameter,
}

pub struct DenseCache {
    input: Matrix, // (batch, in)
}

impl Dense {
    pub fn in_dim(&self) -> usize {
        self.weight.value.shape()[1]
    }

    pub fn out_dim(&self) -> usize {
        self.weight.value.shape()[0]
    }

    pub fn forward(&self, x: &DenseTensor) -> Result<(DenseTensor, DenseCache)> {
        let (batch, features, xm) = flatten_batch(x);
        if features != self.in_dim() {
            return Err(shape_err(
                "dense",
                format!("input width {} != {}", features, self.in_dim()),
            ));
        }
        let w = as_matrix(&self.weight.value);
        let mut y = xm.matmul(&w.transpose())?;
        for r in 0..batch {
            for (c, b) in self.bias.value.data().iter().enumerate() {
                let v = y.get(r, c) + b;
                y.set(r, c, v);
            }
        }
        Ok((matrix_tensor(&y), DenseCache { input: xm }))
    }

    pub fn backward(
        &mut self,
        cache: DenseCache,
        grad_out: &DenseTensor,
        capture: Option<&mut Vec<LinearMapStats>>,
    ) -> Result<DenseTensor> {
        let dy = as_matrix(grad_out); // (batch, out)
        let dw = dy.transpose().matmul(&cache.input)?; // (out, in)
        for (g, d) in self.weight.grad.data_mut().iter_mut().zip(dw.data()) {
            *g += d;
        }
        for c in 0..self.out_dim() {
            let mut acc = 0.0;
            for r in 0..dy.rows() {
                acc += dy.get(r, c);
            }
            self.bias.grad.data_mut()[c] += acc;
        }
        if let Some(sink) = capture {
            sink.push(LinearMapStats {
                weight: self.weight.id,
                bias: Some(self.bias.id),
                kind: MapKind::DenseLike,
                inputs: cache.input.clone(),
                output_grads: dy.clone(),
            });
        }
        let dx = dy.matmul(&as_matrix(&self.weight.value))?; // (batch, in)
        Ok(matrix_tensor(&dx))
    }
}

/// Valid (no padding) strided 2D correlation. Weight shape
/// (out_c, in_c, k, k); input (batch, in_c, h, w).
#[derive(Debug, Clone)]
pub struct Conv2d {
    pub weight: Parameter,
    pub bias: Parameter,
    pub stride: usize,
}

pub struct ConvCache {
    input: DenseTensor,
}

pub fn conv_output_size(input: usize, kernel: usize, stride: usize) -> usize {
    (input - kernel) / stride + 1
}

impl Conv2d {
    fn dims(&self) -> (usize, usize, usize) {
        let s = self.weight.value.shape();
        (s[0], s[1], s[2]) // (out_c, in_c, k)
    }

    pub fn forward(&self, x: &DenseTensor) -> Result<(DenseTensor, ConvCache)> {
        let (oc, ic, k) = self.dims();
        let shape = x.shape();
        if shape.len() != 4 || shape[1] != ic {
            return Err(shape_err(
                "conv",
                format!("expected (batch, {ic}, h, w), got {shape:?}"),
            ));
        }
        let (batch, h, w) = (shape[0], shape[2], shape[3]);
        if h < k || w < k {
            return Err(shape_err("conv", format!("kernel {k} larger than input {h}x{w}")));
        }
        let (oh, ow) = (
            conv_output_size(h, k, self.stride),
            conv_output_size(w, k, self.stride),
        );
        let mut y = DenseTensor::zeros(vec![batch, oc, oh, ow])?;
        let wd = self.weight.value.data();
        let xd = x.data();
        let yd = y.data_mut();
        for b in 0..batch {
            for o in 0..oc {
                let bias = self.bias.value.data()[o];
                for oy in 0..oh {
                    for ox in 0..ow {
                        let mut acc = bias;
                        for c in 0..ic {
                            for ky in 0..k {
                                let xrow = ((b * ic + c) * h + oy * self.stride + ky) * w
                                    + ox * self.stride;
                                let wrow = ((o * ic + c) * k + ky) * k;
                                for kx in 0..k {
                                    acc += xd[xrow + kx] * wd[wrow + kx];
                                }
                            }
                        }
                        yd[((b * oc + o) * oh + oy) * ow + ox] = acc;
                    }
                }
            }
        }
        Ok((y, ConvCache { input: x.clone() }))
    }

    pub fn backward(&mut self, cache: ConvCache, grad_out: &DenseTensor) -> Result<DenseTensor> {
        let (oc, ic, k) = self.dims();
        let x = &cache.input;
        let (batch, h, w) = (x.shape()[0], x.shape()[2], x.shape()[3]);
        let (oh, ow) = (grad_out.shape()[2], grad_out.shape()[3]);
        let mut dx = DenseTensor::zeros(x.shape().to_vec())?;
        let xd = x.data();
        let gd = grad_out.data();
        let wd = self.weight.value.data();
        {
            let dwd = self.weight.grad.data_mut();
            for b in 0..batch {
                for o in 0..oc {
                    for oy in 0..oh {
                        for ox in 0..ow {
                            let g = gd[((b * oc + o) * oh + oy) * ow + ox];
                            if g == 0.0 {
                                continue;
                            }
                            for c in 0..ic {
                                for ky in 0..k {
                                    let xrow = ((b * ic + c) * h + oy * self.stride + ky) * w
                                        + ox * self.stride;
                                    let wrow = ((o * ic + c) * k + ky) * k;
                                    for kx in 0..k {
                                        dwd[wrow + kx] += g * xd[xrow + kx];
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
        {
            let dbd = self.bias.grad.data_mut();
            for b in 0..batch {
                for o in 0..oc {
                    let mut acc = 0.0;
                    for oy in 0..oh {
                        for ox in 0..ow {
                            acc += gd[((b * oc + o) * oh + oy) * ow + ox];
                        }
                    }
                    dbd[o] += acc;
                }
            }
        }
        {
            let dxd = dx.data_mut();
            for b in 0..batch {
                for o in 0..oc {
                    for oy in 0..oh {
                        for ox in 0..ow {
                            let g = gd[((b * oc + o) * oh + oy) * ow + ox];
                            if g == 0.0 {
                                continue;
                            }
                            for c in 0..ic {
                                for ky in 0..k {
                                    let xrow = ((b * ic + c) * h + oy * self.stride + ky) * w
                                        + ox * self.stride;
                                    let wrow = ((o * ic + c) * k + ky) * k;
                                    for kx in 0..k {
                                        dxd[xrow + kx] += g * wd[wrow + kx];
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
        Ok(dx)
    }
}

/// ReLU with derivative 0 at exactly 0.
pub struct ReluCache {
    input: DenseTensor,
}

pub fn relu_forward(x: &DenseTensor) -> (DenseTensor, ReluCache) {
    let mut y = x.clone();
    for v in y.data_mut() {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    (y, ReluCache { input: x.clone() })
}

pub fn relu_backward(cache: ReluCache, grad_out: &DenseTensor) -> DenseTensor {
    let mut dx = grad_out.clone();
    for (d, &x) in dx.data_mut().iter_mut().zip(cache.input.data()) {
        if x <= 0.0 {
            *d = 0.0;
        }
    }
    dx
}

/// Tensor regression layer. The weight tensor `W` of shape
/// `(I_1..I_{N-1}, O)` is held permanently in Tucker-factored form:
/// core `(R_1..R_N)`, input factors `U^(k)` of shape `(I_k, R_k)`, and an
/// output factor of shape `(O, R_N)`.
///
/// `y = <x, W>_{N-1} + b`, computed factor by factor without ever
/// materializing `W`.
#[derive(Debug, Clone)]
pub struct TrlLayer {
    pub input_modes: Vec<usize>,
    pub output: usize,
    pub ranks: Vec<usize>,
    pub core: Parameter,
    pub factors: Vec<Parameter>,
    pub bias: Parameter,
}

pub struct TrlCache {
    /// Contraction states: `stages[0]` is the input, `stages[k]` has modes
    /// `(batch, R_1..R_k, I_{k+1}..)`.
    stages: Vec<DenseTensor>,
    /// Final contraction state `(batch, R_1..R_{N-1})`.
    contracted: DenseTensor,
    /// Core output `(batch, R_N)`.
    core_out: Matrix,
}

impl TrlLayer {
    pub fn n_input_modes(&self) -> usize {
        self.input_modes.len()
    }

    /// Learnable coefficient count of the factored form (plus bias).
    pub fn param_count(&self) -> usize {
        let mut shape = self.input_modes.clone();
        shape.push(self.output);
        decomp::tucker_param_count(&shape, &self.ranks) + self.output
    }

    /// Coefficients a dense layer of the same shape would need (plus bias).
    pub fn dense_equivalent_count(&self) -> usize {
        self.input_modes.iter().product::<usize>() * self.output + self.output
    }

    /// The dense weight tensor this layer represents, shape
    /// `(I_1..I_{N-1}, O)`. For tests and inspection only; the forward pass
    /// never builds it.
    pub fn reconstruct_weight(&self) -> Result<DenseTensor> {
        let d = decomp::TuckerDecomposition {
            core: self.core.value.clone(),
            factors: self.factors.iter().map(|f| as_matrix(&f.value)).collect(),
        };
        Ok(decomp::tucker_reconstruct(&d)?)
    }

    pub fn forward(&self, x: &DenseTensor) -> Result<(DenseTensor, TrlCache)> {
        let n_in = self.n_input_modes();
        if x.num_modes() != n_in + 1 || x.shape()[1..] != self.input_modes[..] {
            return Err(shape_err(
                "trl",
                format!(
                    "expected (batch, {:?}), got {:?}",
                    self.input_modes,
                    x.shape()
                ),
            ));
        }
        let batch = x.shape()[0];

        // contract each input mode with its factor: t <- t x_{k+1} U^(k)^T
        let mut stages = Vec::with_capacity(n_in);
        let mut t = x.clone();
        for k in 0..n_in {
            stages.push(t.clone());
            let u = as_matrix(&self.factors[k].value); // (I_k, R_k)
            t = tensor_core::mode_n_product(&t, &u.transpose(), k + 1)?;
        }

        // contract with the core over (R_1..R_{N-1})
        let core_out_t = generalized_inner_product(&t, &self.core.value, n_in)?;
        let core_out = Matrix::from_vec(batch, self.ranks[n_in], core_out_t.data().to_vec())?;

        // output factor plus bias
        let u_out = as_matrix(&self.factors[n_in].value); // (O, R_N)
        let mut y = core_out.matmul(&u_out.transpose())?;
        for r in 0..batch {
            for (c, b) in self.bias.value.data().iter().enumerate() {
                let v = y.get(r, c) + b;
                y.set(r, c, v);
            }
        }
        Ok((
            matrix_tensor(&y),
            TrlCache {
                stages,
                contracted: t,
                core_out,
            },
        ))
    }

    pub fn backward(
        &mut self,
        cache: TrlCache,
        grad_out: &DenseTensor,
        mut capture: Option<&mut Vec<LinearMapStats>>,
    ) -> Result<DenseTensor> {
        let n_in = self.n_input_modes();
        let batch = grad_out.shape()[0];
        let dy = as_matrix(grad_out); // (batch, O)

        // output factor and bias
        let u_out = as_matrix(&self.factors[n_in].value); // (O, R_N)
        let du_out = dy.transpose().matmul(&cache.core_out)?; // (O, R_N)
        for (g, d) in self.factors[n_in].grad.data_mut().iter_mut().zip(du_out.data()) {
            *g += d;
        }
        for c in 0..self.output {
            let mut acc = 0.0;
            for r in 0..batch {
                acc += dy.get(r, c);
            }
            self.bias.grad.data_mut()[c] += acc;
        }
        if let Some(sink) = capture.as_deref_mut() {
            sink.push(LinearMapStats {
                weight: self.factors[n_in].id,
                bias: Some(self.bias.id),
                kind: MapKind::DenseLike,
                inputs: cache.core_out.clone(),
                output_grads: dy.clone(),
            });
        }
        let ds = dy.matmul(&u_out)?; // (batch, R_N)

        // core: dG[p, r_N] = sum_b t[b, p] ds[b, r_N]
        let p_len: usize = self.ranks[..n_in].iter().product();
        let t_flat = Matrix::from_vec(batch, p_len, cache.contracted.data().to_vec())?;
        let dg = t_flat.transpose().matmul(&ds)?; // (P, R_N) row-major == core layout
        for (g, d) in self.core.grad.data_mut().iter_mut().zip(dg.data()) {
            *g += d;
        }
        if let Some(sink) = capture.as_deref_mut() {
            sink.push(LinearMapStats {
                weight: self.core.id,
                bias: None,
                kind: MapKind::CoreLastMode,
                inputs: t_flat.clone(),
                output_grads: ds.clone(),
            });
        }

        // dt[b, p] = sum_rN ds[b, rN] G[p, rN]
        let g_flat = Matrix::from_vec(p_len, self.ranks[n_in], self.core.value.data().to_vec())?;
        let dt_flat = ds.matmul(&g_flat.transpose())?; // (batch, P)
        let mut dt_shape = vec![batch];
        dt_shape.extend_from_slice(&self.ranks[..n_in]);
        let mut dt = DenseTensor::from_vec(dt_shape, dt_flat.into_data())?;

        // walk the mode contractions in reverse
        for k in (0..n_in).rev() {
            let mode = k + 1;
            let before = &cache.stages[k];
            let u = as_matrix(&self.factors[k].value); // (I_k, R_k)
            let a = unfold(before, mode)?; // (I_k, rest)
            let d = unfold(&dt, mode)?; // (R_k, rest)
            let du = a.matmul(&d.transpose())?; // (I_k, R_k)
            for (g, dv) in self.factors[k].grad.data_mut().iter_mut().zip(du.data()) {
                *g += dv;
            }
            if let Some(sink) = capture.as_deref_mut() {
                sink.push(LinearMapStats {
                    weight: self.factors[k].id,
                    bias: None,
                    kind: MapKind::TransposedFactor,
                    inputs: a.transpose(),        // (rest, I_k): one sample per column slot
                    output_grads: d.transpose(),  // (rest, R_k)
                });
            }
            let dprev = u.matmul(&d)?; // (I_k, rest)
            dt = fold(&dprev, mode, before.shape())?;
        }
        Ok(dt)
    }
}
