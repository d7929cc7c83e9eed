//! End-to-end correctness probe: the dense agent's learned q-values on the
//! chain must approach the value-iteration oracle.

use envs_harness::{value_iteration, RunConfig, TrainLoop};
use tensor_core::DenseTensor;

pub fn chain_config(total_steps: usize) -> RunConfig {
    RunConfig::from_json(&format!(
        r#"{{
        "env": {{"name": "chain", "k": 8, "horizon": 200}},
        "network": {{
            "layers": [{{"dense": {{"width": 32}}}}, "relu"],
            "head": {{"kind": "scalar", "dueling": false}}
        }},
        "agent": {{
            "gamma": 0.99, "n_step": 3, "batch_size": 32, "min_replay": 200,
            "replay_capacity": 5000, "target_sync_period": 200,
            "eps_start": 1.0, "eps_end": 0.01, "eps_fraction": 0.1
        }},
        "optim": {{"assignment": "adam", "lr": 0.001}},
        "run": {{"total_steps": {total_steps}, "eval_episodes": 50, "variant": "chain-dense"}}
    }}"#
    ))
    .unwrap()
}

pub fn q_sup_norm_vs_oracle(train: &TrainLoop, k: usize, gamma: f64) -> f64 {
    let oracle = value_iteration(k, gamma, 1e-12);
    let mut sup: f64 = 0.0;
    for s in 0..k - 1 {
        let mut one_hot = vec![0.0; k];
        one_hot[s] = 1.0;
        let obs = DenseTensor::from_vec(vec![k], one_hot).unwrap();
        let q = train.agent.q_row(&obs).unwrap();
        for a in 0..2 {
            sup = sup.max((q[a] - oracle[s][a]).abs());
        }
    }
    sup
}

#[test]
fn chain_agent_converges_to_value_iteration_oracle() {
    for seed in [0u64, 1, 2] {
        let mut train = TrainLoop::new(chain_config(20_000), seed).unwrap();
        train.run_to_completion().unwrap();
        let sup = q_sup_norm_vs_oracle(&train, 8, 0.99);
        assert!(sup < 0.1, "seed {seed}: sup-norm {sup}");
    }
}
