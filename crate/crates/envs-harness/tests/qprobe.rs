//! Scratch diagnostic: inspect learned q-values on crafted Catch states.

use tensor_core::DenseTensor;

fn catch_obs(grid: usize, ball_prev: (usize, usize), ball: (usize, usize), paddle: usize) -> DenseTensor {
    let mut data = vec![0.0; 2 * grid * grid];
    data[ball_prev.0 * grid + ball_prev.1] = 1.0;
    data[(grid - 1) * grid + paddle] = 1.0;
    let off = grid * grid;
    data[off + ball.0 * grid + ball.1] = 1.0;
    data[off + (grid - 1) * grid + paddle] = 1.0;
    DenseTensor::from_vec(vec![2, grid, grid], data).unwrap()
}

#[test]
#[ignore]
fn probe_checkpoint() {
    let dir = std::env::var("PROBE_DIR").expect("set PROBE_DIR");
    let net = autodiff_net::load_checkpoint(std::path::Path::new(&dir).join("checkpoint")).unwrap();
    let g = 24;
    println!("state: ball falling at col c, paddle at col p, ball row 20");
    for (c, p) in [(5usize, 12usize), (20, 12), (12, 12), (11, 12), (13, 12), (0, 23), (23, 0)] {
        let obs = catch_obs(g, (19, c), (20, c), p);
        let mut shape = vec![1];
        shape.extend_from_slice(obs.shape());
        let batch = DenseTensor::from_vec(shape, obs.data().to_vec()).unwrap();
        let (q, _) = net.forward_features(&batch).unwrap();
        println!(
            "ball c={c:2} paddle p={p:2}: q = [{:+.3} {:+.3} {:+.3}]  best={}",
            q.data()[0],
            q.data()[1],
            q.data()[2],
            ["left", "stay", "right"][rl_agent::argmax_lowest(q.data())]
        );
    }
}
