//! Double-Q target values against hand-computed oracles with crafted nets.

use autodiff_net::{HeadKindSpec, HeadSpec, LayerSpec, MapSpec, Network, NetworkSpec};
use rl_agent::{double_q_target, TargetInput};
use tensor_core::DenseTensor;

/// A linear net whose q-values over one-hot states are exactly the rows of
/// `table` (states x actions).
fn table_net(table: &[Vec<f64>]) -> Network {
    let states = table.len();
    let actions = table[0].len();
    let spec = NetworkSpec {
        layers: vec![LayerSpec::Dense { width: actions }],
        head: HeadSpec {
            kind: HeadKindSpec::Scalar,
            dueling: false,
            value: MapSpec::Dense,
            advantage: MapSpec::Dense,
        },
    };
    let mut net = Network::build(&spec, &[states], actions, 0).unwrap();
    for p in net.params_mut() {
        match p.name.as_str() {
            "layer0.weight" => {
                // (actions, states): column s holds q(s, .)
                for a in 0..actions {
                    for s in 0..states {
                        p.value.data_mut()[a * states + s] = table[s][a];
                    }
                }
            }
            "head.output.weight" => {
                for a in 0..actions {
                    for c in 0..actions {
                        p.value.data_mut()[a * actions + c] = if a == c { 1.0 } else { 0.0 };
                    }
                }
            }
            _ => {
                for v in p.value.data_mut() {
                    *v = 0.0;
                }
            }
        }
    }
    net
}

fn one_hot_batch(states: &[usize], dim: usize) -> DenseTensor {
    let mut data = vec![0.0; states.len() * dim];
    for (i, &s) in states.iter().enumerate() {
        data[i * dim + s] = 1.0;
    }
    DenseTensor::from_vec(vec![states.len(), dim], data).unwrap()
}

#[test]
fn terminal_transition_is_pure_reward() {
    let net = table_net(&[vec![3.0, -1.0], vec![0.5, 0.5]]);
    let target = net.clone();
    let batch = one_hot_batch(&[1], 2);
    let y = double_q_target(
        &net,
        &target,
        &batch,
        &[TargetInput {
            n_step_reward: 1.0,
            effective_discount: 0.99,
            done: true,
        }],
    )
    .unwrap();
    assert_eq!(y, vec![1.0]);
}

#[test]
fn identical_nets_reduce_to_max_target() {
    // online == target: y = r + gamma * max_a q(s', a)
    let net = table_net(&[vec![2.0, 7.0, -3.0]]);
    let target = net.clone();
    let batch = one_hot_batch(&[0], 1);
    let y = double_q_target(
        &net,
        &target,
        &batch,
        &[TargetInput {
            n_step_reward: 0.5,
            effective_discount: 0.9,
            done: false,
        }],
    )
    .unwrap();
    assert!((y[0] - (0.5 + 0.9 * 7.0)).abs() < 1e-12);
}

#[test]
fn double_q_decouples_selection_from_evaluation() {
    // two-state deterministic MDP oracle: the online net prefers action 1 in
    // state 0, so the target net's value AT action 1 is bootstrapped even
    // though the target net itself ranks action 0 higher.
    let online = table_net(&[vec![0.0, 5.0], vec![1.0, 2.0]]);
    let target = table_net(&[vec![9.0, 4.0], vec![1.0, 2.0]]);
    let batch = one_hot_batch(&[0, 1], 2);
    let inputs = [
        TargetInput {
            n_step_reward: 1.0,
            effective_discount: 0.5,
            done: false,
        },
        TargetInput {
            n_step_reward: -1.0,
            effective_discount: 0.25,
            done: false,
        },
    ];
    let y = double_q_target(&online, &target, &batch, &inputs).unwrap();
    // sample 0: argmax_online q(s0) = action 1, target q(s0, 1) = 4
    assert!((y[0] - (1.0 + 0.5 * 4.0)).abs() < 1e-12);
    // sample 1: argmax_online q(s1) = action 1, target q(s1, 1) = 2
    assert!((y[1] - (-1.0 + 0.25 * 2.0)).abs() < 1e-12);
}
