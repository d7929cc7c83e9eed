//! Network-level behaviour: TRL-vs-dense oracle, shape laws, determinism,
//! checkpoints, and the scattering front-end.

use autodiff_net::{
    count_parameters, load_checkpoint, save_checkpoint, HeadKindSpec, HeadSpec, LayerSpec,
    MapSpec, Network, NetworkSpec, TrlLayer,
};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tensor_core::{generalized_inner_product, DenseTensor};

fn random_tensor(shape: &[usize], seed: u64) -> DenseTensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let len = shape.iter().product();
    DenseTensor::from_vec(shape.to_vec(), (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .unwrap()
}

fn scalar_head(dueling: bool) -> HeadSpec {
    HeadSpec {
        kind: HeadKindSpec::Scalar,
        dueling,
        value: MapSpec::Dense,
        advantage: MapSpec::Dense,
    }
}

fn trl_only_net(input_modes: &[usize], output: usize, ranks: Vec<usize>, seed: u64) -> Network {
    let spec = NetworkSpec {
        layers: vec![LayerSpec::Trl {
            output,
            rank: None,
            ranks: Some(ranks),
        }],
        head: scalar_head(false),
    };
    Network::build(&spec, input_modes, output, seed).unwrap()
}

fn trl_layer_of(net: &Network) -> &TrlLayer {
    match &net.layer_slice()[0] {
        autodiff_net::Layer::Trl(t) => t,
        _ => panic!("expected trl layer"),
    }
}

// test-only accessor
trait LayerSlice {
    fn layer_slice(&self) -> &[autodiff_net::Layer];
}

impl LayerSlice for Network {
    fn layer_slice(&self) -> &[autodiff_net::Layer] {
        self.layers()
    }
}

#[test]
fn identity_dense_layer_is_identity() {
    let spec = NetworkSpec {
        layers: vec![LayerSpec::Dense { width: 4 }],
        head: scalar_head(false),
    };
    let mut net = Network::build(&spec, &[4], 4, 3).unwrap();
    for p in net.params_mut() {
        let is_layer_weight = p.name == "layer0.weight";
        let is_head_weight = p.name == "head.output.weight";
        if is_layer_weight || is_head_weight {
            let cols = p.value.shape()[1];
            let n = p.value.shape()[0];
            for r in 0..n {
                for c in 0..cols {
                    p.value.data_mut()[r * cols + c] = if r == c { 1.0 } else { 0.0 };
                }
            }
        }
    }
    let input = random_tensor(&[3, 4], 5);
    let (out, _) = net.forward(&input).unwrap();
    assert!(out.max_abs_diff(&input).unwrap() < 1e-15);
}

#[test]
fn trl_forward_matches_dense_contraction_oracle() {
    // reconstruct-then-contract oracle across shapes with <= 4 modes
    let cases: Vec<(Vec<usize>, usize, Vec<usize>)> = vec![
        (vec![3, 4], 2, vec![2, 2, 2]),
        (vec![6], 4, vec![3, 3]),
        (vec![2, 3, 2], 5, vec![2, 2, 2, 3]),
        (vec![4, 5], 6, vec![2, 3, 4]),
        (vec![5, 2, 3], 4, vec![5, 2, 3, 4]), // full ranks
    ];
    for (i, (modes, output, ranks)) in cases.into_iter().enumerate() {
        let net = trl_only_net(&modes, output, ranks, 40 + i as u64);
        let layer = trl_layer_of(&net);
        let mut in_shape = vec![3usize];
        in_shape.extend_from_slice(&modes);
        let x = random_tensor(&in_shape, 50 + i as u64);

        let (y, _) = layer.forward(&x).unwrap();

        let w = layer.reconstruct_weight().unwrap();
        let mut expect = generalized_inner_product(&x, &w, modes.len()).unwrap();
        for b in 0..3 {
            for o in 0..output {
                let v = expect.get(&[b, o]) + layer.bias.value.data()[o];
                expect.set(&[b, o], v);
            }
        }
        assert!(
            y.max_abs_diff(&expect).unwrap() < 1e-10,
            "case {i}: trl forward deviates from dense oracle"
        );
    }
}

#[test]
fn trl_with_identity_factors_is_dense() {
    // full ranks, identity factors, core = dense W: outputs equal x W + b
    let modes = vec![4usize];
    let mut net = trl_only_net(&modes, 3, vec![4, 3], 60);
    let w = random_tensor(&[4, 3], 61);
    {
        let layer = match &mut net.layers_mut()[0] {
            autodiff_net::Layer::Trl(t) => t,
            _ => unreachable!(),
        };
        layer.core.value = w.clone();
        for f in &mut layer.factors {
            let n = f.value.shape()[0];
            let cols = f.value.shape()[1];
            for r in 0..n {
                for c in 0..cols {
                    f.value.data_mut()[r * cols + c] = if r == c { 1.0 } else { 0.0 };
                }
            }
        }
        for b in layer.bias.value.data_mut() {
            *b = 0.25;
        }
    }
    let x = random_tensor(&[2, 4], 62);
    let layer = trl_layer_of(&net);
    let (y, _) = layer.forward(&x).unwrap();
    let mut expect = generalized_inner_product(&x, &w, 1).unwrap();
    for v in expect.data_mut() {
        *v += 0.25;
    }
    assert!(y.max_abs_diff(&expect).unwrap() < 1e-12);
}

#[test]
fn table3_architecture_shapes_and_trl_presets() {
    // conv 5x5 stride 5 on 84x84 -> 16x16, then 3x3; hidden rank 128 and
    // final rank 48 instantiate without error
    let spec = NetworkSpec {
        layers: vec![
            LayerSpec::Conv {
                channels: 32,
                kernel: 5,
                stride: 5,
            },
            LayerSpec::Relu,
            LayerSpec::Conv {
                channels: 64,
                kernel: 5,
                stride: 5,
            },
            LayerSpec::Relu,
            LayerSpec::Trl {
                output: 256,
                rank: Some(128),
                ranks: None,
            },
            LayerSpec::Relu,
        ],
        head: HeadSpec {
            kind: HeadKindSpec::Distributional {
                atoms: 51,
                v_min: -10.0,
                v_max: 10.0,
            },
            dueling: true,
            value: MapSpec::Dense,
            advantage: MapSpec::Trl { rank: 48 },
        },
    };
    let net = Network::build(&spec, &[4, 84, 84], 18, 0).unwrap();
    let input = random_tensor(&[1, 4, 84, 84], 70);
    let (out, _) = net.forward(&input).unwrap();
    assert_eq!(out.shape(), &[1, 18, 51]);
    // every action's atom vector is a distribution
    for a in 0..18 {
        let mut sum = 0.0;
        for z in 0..51 {
            let p = out.get(&[0, a, z]);
            assert!(p >= 0.0);
            sum += p;
        }
        assert!((sum - 1.0).abs() < 1e-6);
    }
}

#[test]
fn forward_backward_deterministic_across_runs() {
    let spec = NetworkSpec {
        layers: vec![
            LayerSpec::Conv {
                channels: 2,
                kernel: 3,
                stride: 2,
            },
            LayerSpec::Relu,
            LayerSpec::Flatten,
            LayerSpec::Dense { width: 8 },
            LayerSpec::Relu,
        ],
        head: scalar_head(true),
    };
    let run = || {
        let mut net = Network::build(&spec, &[1, 9, 9], 3, 123).unwrap();
        let input = random_tensor(&[4, 1, 9, 9], 124);
        // a few plain gradient steps
        for _ in 0..5 {
            let (out, tape) = net.forward(&input).unwrap();
            let ones = DenseTensor::from_vec(out.shape().to_vec(), vec![1.0; out.len()]).unwrap();
            net.zero_grad();
            net.backward(tape, &ones).unwrap();
            for p in net.params_mut() {
                let g = p.grad.data().to_vec();
                for (v, gv) in p.value.data_mut().iter_mut().zip(g) {
                    *v -= 1e-3 * gv;
                }
            }
        }
        net.params()
            .iter()
            .flat_map(|p| p.value.data().to_vec())
            .collect::<Vec<f64>>()
    };
    let a = run();
    let b = run();
    assert_eq!(a.len(), b.len());
    for (x, y) in a.iter().zip(b.iter()) {
        assert_eq!(x.to_bits(), y.to_bits());
    }
}

#[test]
fn checkpoint_round_trip() {
    let spec = NetworkSpec {
        layers: vec![
            LayerSpec::Conv {
                channels: 2,
                kernel: 3,
                stride: 2,
            },
            LayerSpec::Relu,
            LayerSpec::Flatten,
            LayerSpec::Trl {
                output: 5,
                rank: Some(3),
                ranks: None,
            },
        ],
        head: scalar_head(true),
    };
    let net = Network::build(&spec, &[1, 9, 9], 3, 7).unwrap();
    let dir = tempfile::tempdir().unwrap();
    save_checkpoint(dir.path(), &net).unwrap();
    let loaded = load_checkpoint(dir.path()).unwrap();

    let input = random_tensor(&[2, 1, 9, 9], 8);
    let (a, _) = net.forward(&input).unwrap();
    let (b, _) = loaded.forward(&input).unwrap();
    assert_eq!(a.data(), b.data());
}

#[test]
fn checkpoint_shape_mismatch_rejected() {
    let spec = NetworkSpec {
        layers: vec![LayerSpec::Dense { width: 4 }],
        head: scalar_head(false),
    };
    let net = Network::build(&spec, &[3], 2, 7).unwrap();
    let dir = tempfile::tempdir().unwrap();
    save_checkpoint(dir.path(), &net).unwrap();
    // overwrite one tensor with a wrong shape
    let bad = DenseTensor::zeros(vec![2, 2]).unwrap();
    tensor_core::save_tensor(dir.path().join("layer0.weight.tnsr"), &bad).unwrap();
    assert!(load_checkpoint(dir.path()).is_err());
}

#[test]
fn scattering_front_end_forward() {
    let spec = NetworkSpec {
        layers: vec![
            LayerSpec::Scattering {
                j: 2,
                l: 2,
                max_order: 2,
            },
            LayerSpec::Flatten,
            LayerSpec::Dense { width: 8 },
        ],
        head: scalar_head(false),
    };
    let net = Network::build(&spec, &[1, 8, 8], 3, 9).unwrap();
    assert!(net.has_front_end());
    // paths per channel: 1 + 4 + 4 = 9; output 2x2
    assert_eq!(net.feature_input_shape(), &[9, 2, 2]);

    let obs = random_tensor(&[1, 8, 8], 10);
    let pre = net.preprocess(&obs).unwrap();
    assert_eq!(pre.shape(), &[9, 2, 2]);

    // forward on raw obs equals forward_features on preprocessed obs
    let mut batch_shape = vec![1usize];
    batch_shape.extend_from_slice(obs.shape());
    let raw_batch = DenseTensor::from_vec(batch_shape, obs.data().to_vec()).unwrap();
    let mut pre_shape = vec![1usize];
    pre_shape.extend_from_slice(pre.shape());
    let pre_batch = DenseTensor::from_vec(pre_shape, pre.data().to_vec()).unwrap();
    let (a, _) = net.forward(&raw_batch).unwrap();
    let (b, _) = net.forward_features(&pre_batch).unwrap();
    assert_eq!(a.data(), b.data());
}

#[test]
fn count_parameters_vs_built_network() {
    let spec = NetworkSpec {
        layers: vec![
            LayerSpec::Conv {
                channels: 4,
                kernel: 3,
                stride: 1,
            },
            LayerSpec::Relu,
            LayerSpec::Trl {
                output: 6,
                rank: Some(2),
                ranks: None,
            },
        ],
        head: scalar_head(true),
    };
    let report = count_parameters(&spec, &[2, 6, 6], 3).unwrap();
    let net = Network::build(&spec, &[2, 6, 6], 3, 1).unwrap();
    assert_eq!(report.total, net.param_count());
}
