#![allow(dead_code)]

use evidence::net::{backward, forward_batch, loss_mse, to_batch_major, InitScheme, Leak, LeakyRnnParams, NetShape, Readout};
use evidence::seed;
use ndarray::Array3;
use rand::Rng as _;

pub const READOUTS: [Readout; 3] = [Readout::Tanh, Readout::ScaledTanh5, Readout::Identity];
pub const LEAKS: [Leak; 2] = [Leak::Leaky, Leak::Vanilla];

fn masked_loss(p: &LeakyRnnParams, inputs: &Array3<f64>, targets: &Array3<f64>, mask: &Array3<f64>) -> f64 {
    let traj = forward_batch(p, inputs.view()).unwrap();
    let outputs = to_batch_major(traj.outputs.view());
    loss_mse(&outputs, targets, mask).unwrap()
}

/// Largest relative error between BPTT gradients and central differences
/// of the loss, over every parameter of a random `N = 8`, `T = 5` network.
pub fn gradient_check(leak: Leak, readout: Readout, case: u64) -> f64 {
    let mut rng = seed::rng(0x6ad + case);
    let shape = NetShape {
        n_hidden: 8,
        n_in: 3,
        n_out: 2,
        tau: 100.0,
        dt: 20.0,
        leak,
        readout,
    };
    let mut p = LeakyRnnParams::init_with(shape, InitScheme::Uniform, &mut rng).unwrap();
    // Stronger recurrence than the default init so that the time
    // dependence matters.
    p.w_rec.mapv_inplace(|w| 2.0 * w);
    let (b, t) = (3, 5);
    let inputs = Array3::from_shape_fn((b, t, 3), |_| rng.random_range(-1.0..1.0));
    let amp = if readout == Readout::ScaledTanh5 { 4.0 } else { 0.8 };
    let targets = Array3::from_shape_fn((b, t, 2), |_| rng.random_range(-amp..amp));
    let mask = Array3::from_shape_fn((b, t, 2), |_| if rng.random::<f64>() < 0.8 { 1.0 } else { 0.0 });
    let (_, grads) = backward(&p, inputs.view(), targets.view(), mask.view()).unwrap();
    let analytic: Vec<Vec<f64>> = grads.tensors().iter().map(|t| t.to_vec()).collect();
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    for (k, g) in analytic.iter().enumerate() {
        for i in 0..g.len() {
            let orig = p.tensors()[k][i];
            p.tensors_mut()[k][i] = orig + h;
            let up = masked_loss(&p, &inputs, &targets, &mask);
            p.tensors_mut()[k][i] = orig - h;
            let down = masked_loss(&p, &inputs, &targets, &mask);
            p.tensors_mut()[k][i] = orig;
            let fd = (up - down) / (2.0 * h);
            let denom = g[i].abs().max(fd.abs()).max(1e-6);
            worst = worst.max((g[i] - fd).abs() / denom);
        }
    }
    worst
}
