//! Sequential networks with an optional fixed scattering front-end and a
//! dueling/distributional output head.

use crate::error::{shape_err, NetError, Result};
use crate::heads::{
    DistributionalHead, DistributionalHeadCache, LinearMap, ScalarHead, ScalarHeadCache,
};
use crate::layers::{
    relu_backward, relu_forward, Conv2d, ConvCache, Dense, DenseCache, ReluCache, TrlCache,
    TrlLayer,
};
use crate::param::{LinearMapStats, ParamId, Parameter};
use crate::spec::{resolve_trl_ranks, HeadKindSpec, LayerSpec, MapSpec, NetworkSpec};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use scattering::{build_filter_bank, FilterBank, ScatteringConfig};
use tensor_core::rng::{derive_seed, standard_normal};
use tensor_core::{DenseTensor, Matrix};

pub enum Layer {
    Conv(Conv2d),
    Relu,
    Flatten,
    Dense(Dense),
    Trl(TrlLayer),
}

pub enum LayerCache {
    Conv(ConvCache),
    Relu(ReluCache),
    Flatten { input_shape: Vec<usize> },
    Dense(DenseCache),
    Trl(TrlCache),
}

enum HeadImpl {
    Scalar(ScalarHead),
    Distributional(DistributionalHead),
}

enum HeadCache {
    Scalar(ScalarHeadCache),
    Distributional(DistributionalHeadCache),
}

/// Fixed-weight scattering front-end shared by forward and preprocessing.
pub struct ScatterFront {
    pub config: ScatteringConfig,
    pub bank: FilterBank,
}

impl Clone for ScatterFront {
    fn clone(&self) -> Self {
        // the bank is deterministic in the config
        ScatterFront {
            config: self.config,
            bank: build_filter_bank(&self.config).expect("config validated at build"),
        }
    }
}

/// Everything recorded during one forward pass; consumed by one backward.
pub struct Tape {
    layer_caches: Vec<LayerCache>,
    head_cache: HeadCache,
    batch: usize,
}

/// A built network: layers own their parameters; ids are dense and stable
/// across clones so target-network syncing is positional.
pub struct Network {
    pub spec: NetworkSpec,
    front: Option<ScatterFront>,
    layers: Vec<Layer>,
    head: HeadImpl,
    input_shape: Vec<usize>,
    feature_input_shape: Vec<usize>,
    actions: usize,
}

impl Clone for Network {
    fn clone(&self) -> Self {
        let mut net = Network::build(&self.spec, &self.input_shape, self.actions, 0)
            .expect("spec validated at build");
        net.copy_parameters_from(self).expect("same architecture");
        net
    }
}

impl Network {
    /// Builds a network with seeded initialization.
    ///
    /// Dense and conv weights use fan-in scaled Gaussians; TRL factors start
    /// with orthonormal columns and the core is Gaussian scaled by
    /// `1/sqrt(prod R_k)`; biases start at zero.
    pub fn build(
        spec: &NetworkSpec,
        input_shape: &[usize],
        actions: usize,
        seed: u64,
    ) -> Result<Network> {
        if actions == 0 {
            return Err(NetError::Spec("need at least one action".into()));
        }
        let shapes = crate::spec::infer_shapes(spec, input_shape)?;
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0x6e65742d696e6974));

        let mut front = None;
        let mut layers = Vec::new();
        for (idx, layer_spec) in spec.layers.iter().enumerate() {
            let in_shape = &shapes[idx];
            match layer_spec {
                LayerSpec::Scattering { j, l, max_order } => {
                    let config = ScatteringConfig {
                        j: *j,
                        l: *l,
                        max_order: *max_order,
                        height: in_shape[1],
                        width: in_shape[2],
                    };
                    let bank = build_filter_bank(&config)?;
                    front = Some(ScatterFront { config, bank });
                }
                LayerSpec::Conv {
                    channels,
                    kernel,
                    stride,
                } => {
                    let fan_in = in_shape[0] * kernel * kernel;
                    let std = (2.0 / fan_in as f64).sqrt();
                    let weight = gaussian_tensor(
                        vec![*channels, in_shape[0], *kernel, *kernel],
                        std,
                        &mut rng,
                    );
                    layers.push(Layer::Conv(Conv2d {
                        weight: Parameter::new(format!("layer{idx}.weight"), weight),
                        bias: Parameter::new(
                            format!("layer{idx}.bias"),
                            DenseTensor::zeros(vec![*channels])?,
                        ),
                        stride: *stride,
                    }));
                }
                LayerSpec::Relu => layers.push(Layer::Relu),
                LayerSpec::Flatten => layers.push(Layer::Flatten),
                LayerSpec::Dense { width } => {
                    layers.push(Layer::Dense(build_dense(
                        &format!("layer{idx}"),
                        in_shape.iter().product(),
                        *width,
                        &mut rng,
                    )?));
                }
                LayerSpec::Trl { output, rank, ranks } => {
                    let resolved = resolve_trl_ranks(*rank, ranks, in_shape, *output)?;
                    layers.push(Layer::Trl(build_trl(
                        &format!("layer{idx}"),
                        in_shape,
                        *output,
                        &resolved,
                        &mut rng,
                    )?));
                }
            }
        }

        let features = shapes.last().expect("inferred shapes")[0];
        let head = match spec.head.kind {
            HeadKindSpec::Scalar => HeadImpl::Scalar(ScalarHead {
                actions,
                value: if spec.head.dueling {
                    Some(build_map("head.value", &spec.head.value, features, 1, &mut rng)?)
                } else {
                    None
                },
                advantage: build_map(
                    if spec.head.dueling { "head.advantage" } else { "head.output" },
                    &spec.head.advantage,
                    features,
                    actions,
                    &mut rng,
                )?,
            }),
            HeadKindSpec::Distributional { atoms, v_min, v_max } => {
                if atoms < 2 || v_min >= v_max {
                    return Err(NetError::Spec(format!(
                        "distributional head needs atoms >= 2 and v_min < v_max, got {atoms}, [{v_min}, {v_max}]"
                    )));
                }
                HeadImpl::Distributional(DistributionalHead {
                    actions,
                    atoms,
                    v_min,
                    v_max,
                    value: if spec.head.dueling {
                        Some(build_map("head.value", &spec.head.value, features, atoms, &mut rng)?)
                    } else {
                        None
                    },
                    advantage: build_map(
                        if spec.head.dueling { "head.advantage" } else { "head.output" },
                        &spec.head.advantage,
                        features,
                        actions * atoms,
                        &mut rng,
                    )?,
                })
            }
        };

        let feature_input_shape = if front.is_some() {
            shapes[1].clone()
        } else {
            input_shape.to_vec()
        };
        let mut net = Network {
            spec: spec.clone(),
            front,
            layers,
            head,
            input_shape: input_shape.to_vec(),
            feature_input_shape,
            actions,
        };
        for (i, p) in net.params_mut().into_iter().enumerate() {
            p.id = ParamId(i);
        }
        Ok(net)
    }

    pub fn actions(&self) -> usize {
        self.actions
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn input_shape(&self) -> &[usize] {
        &self.input_shape
    }

    /// Per-sample shape the layer stack expects (after any front-end).
    pub fn feature_input_shape(&self) -> &[usize] {
        &self.feature_input_shape
    }

    pub fn has_front_end(&self) -> bool {
        self.front.is_some()
    }

    pub fn is_distributional(&self) -> bool {
        matches!(self.head, HeadImpl::Distributional(_))
    }

    pub fn atoms(&self) -> Option<usize> {
        match &self.head {
            HeadImpl::Distributional(d) => Some(d.atoms),
            HeadImpl::Scalar(_) => None,
        }
    }

    pub fn support(&self) -> Option<Vec<f64>> {
        match &self.head {
            HeadImpl::Distributional(d) => Some(d.support()),
            HeadImpl::Scalar(_) => None,
        }
    }

    /// Applies the fixed front-end to one raw observation (no batch mode).
    /// Identity when the network has no front-end.
    pub fn preprocess(&self, obs: &DenseTensor) -> Result<DenseTensor> {
        match &self.front {
            None => Ok(obs.clone()),
            Some(f) => Ok(scattering::scatter(obs, &f.bank, &f.config)?.coeffs),
        }
    }

    /// Forward pass on raw observations with batch mode first.
    /// Scalar heads return q-values (batch, actions); distributional heads
    /// return probabilities (batch, actions, atoms).
    pub fn forward(&self, batch_obs: &DenseTensor) -> Result<(DenseTensor, Tape)> {
        if batch_obs.shape()[1..] != self.input_shape[..] {
            return Err(shape_err(
                "network",
                format!(
                    "expected (batch, {:?}), got {:?}",
                    self.input_shape,
                    batch_obs.shape()
                ),
            ));
        }
        match &self.front {
            None => self.forward_features(batch_obs),
            Some(f) => {
                let batch = batch_obs.shape()[0];
                let mut out = Vec::new();
                let mut per_shape = Vec::new();
                let plane: usize = self.input_shape.iter().product();
                for b in 0..batch {
                    let sample = DenseTensor::from_vec(
                        self.input_shape.clone(),
                        batch_obs.data()[b * plane..(b + 1) * plane].to_vec(),
                    )?;
                    let scattered = scattering::scatter(&sample, &f.bank, &f.config)?.coeffs;
                    per_shape = scattered.shape().to_vec();
                    out.extend_from_slice(scattered.data());
                }
                let mut shape = vec![batch];
                shape.extend_from_slice(&per_shape);
                self.forward_features(&DenseTensor::from_vec(shape, out)?)
            }
        }
    }

    /// Forward pass on already-preprocessed features (skips the front-end).
    pub fn forward_features(&self, batch: &DenseTensor) -> Result<(DenseTensor, Tape)> {
        if batch.shape()[1..] != self.feature_input_shape[..] {
            return Err(shape_err(
                "network",
                format!(
                    "expected features (batch, {:?}), got {:?}",
                    self.feature_input_shape,
                    batch.shape()
                ),
            ));
        }
        let mut x = batch.clone();
        let mut layer_caches = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let (y, cache) = match layer {
                Layer::Conv(c) => {
                    let (y, cache) = c.forward(&x)?;
                    (y, LayerCache::Conv(cache))
                }
                Layer::Relu => {
                    let (y, cache) = relu_forward(&x);
                    (y, LayerCache::Relu(cache))
                }
                Layer::Flatten => {
                    let input_shape = x.shape().to_vec();
                    let flat: usize = input_shape[1..].iter().product();
                    let y = x.clone().reshape(vec![input_shape[0], flat])?;
                    (y, LayerCache::Flatten { input_shape })
                }
                Layer::Dense(d) => {
                    let (y, cache) = d.forward(&x)?;
                    (y, LayerCache::Dense(cache))
                }
                Layer::Trl(t) => {
                    let (y, cache) = t.forward(&x)?;
                    (y, LayerCache::Trl(cache))
                }
            };
            layer_caches.push(cache);
            x = y;
        }
        let (out, head_cache) = match &self.head {
            HeadImpl::Scalar(h) => {
                let (q, c) = h.forward(&x)?;
                (q, HeadCache::Scalar(c))
            }
            HeadImpl::Distributional(h) => {
                let (p, c) = h.forward(&x)?;
                (p, HeadCache::Distributional(c))
            }
        };
        Ok((
            out,
            Tape {
                layer_caches,
                head_cache,
                batch: batch.shape()[0],
            },
        ))
    }

    /// Scalar q-values regardless of head kind: the distributional head's
    /// expectation under its support, or the scalar head output directly.
    pub fn q_values(&self, batch: &DenseTensor) -> Result<DenseTensor> {
        let (out, _) = self.forward(batch)?;
        match &self.head {
            HeadImpl::Scalar(_) => Ok(out),
            HeadImpl::Distributional(d) => crate::heads::expected_q(&out, &d.support()),
        }
    }

    /// Backward pass: consumes the tape, accumulates parameter gradients,
    /// and returns the gradient at the (post-front-end) input.
    pub fn backward(&mut self, tape: Tape, grad_out: &DenseTensor) -> Result<DenseTensor> {
        self.backward_inner(tape, grad_out, None)
    }

    /// Backward pass that also captures per-linear-map activation and
    /// gradient statistics for Kronecker-factored preconditioning.
    pub fn backward_with_capture(
        &mut self,
        tape: Tape,
        grad_out: &DenseTensor,
    ) -> Result<(DenseTensor, Vec<LinearMapStats>)> {
        let mut stats = Vec::new();
        let dx = self.backward_inner(tape, grad_out, Some(&mut stats))?;
        Ok((dx, stats))
    }

    fn backward_inner(
        &mut self,
        tape: Tape,
        grad_out: &DenseTensor,
        mut capture: Option<&mut Vec<LinearMapStats>>,
    ) -> Result<DenseTensor> {
        if grad_out.shape()[0] != tape.batch {
            return Err(shape_err("backward", "gradient batch differs from forward"));
        }
        let mut grad = match (&mut self.head, tape.head_cache) {
            (HeadImpl::Scalar(h), HeadCache::Scalar(c)) => {
                h.backward(c, grad_out, capture.as_deref_mut())?
            }
            (HeadImpl::Distributional(h), HeadCache::Distributional(c)) => {
                h.backward(c, grad_out, capture.as_deref_mut())?
            }
            _ => return Err(shape_err("backward", "head cache mismatch")),
        };
        for (layer, cache) in self
            .layers
            .iter_mut()
            .rev()
            .zip(tape.layer_caches.into_iter().rev())
        {
            grad = match (layer, cache) {
                (Layer::Conv(l), LayerCache::Conv(c)) => l.backward(c, &grad)?,
                (Layer::Relu, LayerCache::Relu(c)) => relu_backward(c, &grad),
                (Layer::Flatten, LayerCache::Flatten { input_shape }) => {
                    grad.clone().reshape(input_shape)?
                }
                (Layer::Dense(l), LayerCache::Dense(c)) => {
                    l.backward(c, &grad, capture.as_deref_mut())?
                }
                (Layer::Trl(l), LayerCache::Trl(c)) => {
                    l.backward(c, &grad, capture.as_deref_mut())?
                }
                _ => return Err(shape_err("backward", "layer cache mismatch")),
            };
        }
        Ok(grad)
    }

    pub fn zero_grad(&mut self) {
        for p in self.params_mut() {
            p.zero_grad();
        }
    }

    pub fn params(&self) -> Vec<&Parameter> {
        let mut out = Vec::new();
        for layer in &self.layers {
            match layer {
                Layer::Conv(c) => {
                    out.push(&c.weight);
                    out.push(&c.bias);
                }
                Layer::Dense(d) => {
                    out.push(&d.weight);
                    out.push(&d.bias);
                }
                Layer::Trl(t) => {
                    out.push(&t.core);
                    out.extend(t.factors.iter());
                    out.push(&t.bias);
                }
                _ => {}
            }
        }
        match &self.head {
            HeadImpl::Scalar(h) => {
                if let Some(v) = &h.value {
                    out.extend(v.params());
                }
                out.extend(h.advantage.params());
            }
            HeadImpl::Distributional(h) => {
                if let Some(v) = &h.value {
                    out.extend(v.params());
                }
                out.extend(h.advantage.params());
            }
        }
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut Parameter> {
        let mut out = Vec::new();
        for layer in &mut self.layers {
            match layer {
                Layer::Conv(c) => {
                    out.push(&mut c.weight);
                    out.push(&mut c.bias);
                }
                Layer::Dense(d) => {
                    out.push(&mut d.weight);
                    out.push(&mut d.bias);
                }
                Layer::Trl(t) => {
                    out.push(&mut t.core);
                    out.extend(t.factors.iter_mut());
                    out.push(&mut t.bias);
                }
                _ => {}
            }
        }
        match &mut self.head {
            HeadImpl::Scalar(h) => {
                if let Some(v) = &mut h.value {
                    out.extend(v.params_mut());
                }
                out.extend(h.advantage.params_mut());
            }
            HeadImpl::Distributional(h) => {
                if let Some(v) = &mut h.value {
                    out.extend(v.params_mut());
                }
                out.extend(h.advantage.params_mut());
            }
        }
        out
    }

    /// Hard copy of all parameter values (target-network sync).
    pub fn copy_parameters_from(&mut self, other: &Network) -> Result<()> {
        let src: Vec<DenseTensor> = other.params().iter().map(|p| p.value.clone()).collect();
        let mut dst = self.params_mut();
        if src.len() != dst.len() {
            return Err(shape_err("sync", "parameter counts differ"));
        }
        for (d, s) in dst.iter_mut().zip(src) {
            if d.value.shape() != s.shape() {
                return Err(shape_err("sync", format!("shape mismatch at {}", d.name)));
            }
            d.value = s;
        }
        Ok(())
    }

    pub fn param_count(&self) -> usize {
        self.params().iter().map(|p| p.value.len()).sum()
    }
}

fn gaussian_tensor(shape: Vec<usize>, std: f64, rng: &mut ChaCha8Rng) -> DenseTensor {
    let len = shape.iter().product();
    let data = (0..len).map(|_| std * standard_normal(rng)).collect();
    DenseTensor::from_vec(shape, data).expect("valid shape")
}

fn build_dense(name: &str, in_dim: usize, out_dim: usize, rng: &mut ChaCha8Rng) -> Result<Dense> {
    let std = (2.0 / in_dim as f64).sqrt();
    Ok(Dense {
        weight: Parameter::new(
            format!("{name}.weight"),
            gaussian_tensor(vec![out_dim, in_dim], std, rng),
        ),
        bias: Parameter::new(format!("{name}.bias"), DenseTensor::zeros(vec![out_dim])?),
    })
}

fn build_trl(
    name: &str,
    input_modes: &[usize],
    output: usize,
    ranks: &[usize],
    rng: &mut ChaCha8Rng,
) -> Result<TrlLayer> {
    let n_in = input_modes.len();
    let mut factors = Vec::with_capacity(n_in + 1);
    for (k, &extent) in input_modes.iter().enumerate() {
        let m = Matrix::random_orthonormal(extent, ranks[k], rng);
        factors.push(Parameter::new(
            format!("{name}.factor{k}"),
            DenseTensor::from_vec(vec![extent, ranks[k]], m.into_data())?,
        ));
    }
    let m_out = Matrix::random_orthonormal(output, ranks[n_in], rng);
    factors.push(Parameter::new(
        format!("{name}.factor{n_in}"),
        DenseTensor::from_vec(vec![output, ranks[n_in]], m_out.into_data())?,
    ));
    let core_len: usize = ranks.iter().product();
    let core_std = 1.0 / (core_len as f64).sqrt();
    Ok(TrlLayer {
        input_modes: input_modes.to_vec(),
        output,
        ranks: ranks.to_vec(),
        core: Parameter::new(
            format!("{name}.core"),
            gaussian_tensor(ranks.to_vec(), core_std, rng),
        ),
        factors,
        bias: Parameter::new(format!("{name}.bias"), DenseTensor::zeros(vec![output])?),
    })
}

fn build_map(
    name: &str,
    map: &MapSpec,
    features: usize,
    out: usize,
    rng: &mut ChaCha8Rng,
) -> Result<LinearMap> {
    Ok(match map {
        MapSpec::Dense => LinearMap::Dense(build_dense(name, features, out, rng)?),
        MapSpec::Trl { rank } => {
            let ranks = crate::spec::scalar_rank_to_ranks(*rank, &[features], out);
            LinearMap::Trl(build_trl(name, &[features], out, &ranks, rng)?)
        }
    })
}
