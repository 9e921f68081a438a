//! Forward simulation, loss and backpropagation through time.
//!
//! Internally everything is time-major: a batch of `B` trials of length `T`
//! is stored as `T x B x ...` so each step is one dense block.

use ndarray::linalg::general_mat_mul;
use ndarray::{s, Array1, Array2, Array3, ArrayView1, ArrayView2, ArrayView3, Axis, Zip};

use crate::error::{Error, Result};
use crate::net::params::{Gradients, LeakyRnnParams};

/// One Euler step for a single state.
pub fn step(p: &LeakyRnnParams, z: ArrayView1<f64>, x_in: ArrayView1<f64>) -> Result<Array1<f64>> {
    let alpha = p.alpha();
    let drive = p.w_rec.dot(&z) + p.w_in.dot(&x_in) + &p.b;
    let next = Zip::from(&z)
        .and(&drive)
        .map_collect(|&z, &a| (1.0 - alpha) * z + alpha * a.max(0.0));
    if next.iter().all(|v| v.is_finite()) {
        Ok(next)
    } else {
        Err(Error::Divergence("hidden state after one step".into()))
    }
}

/// Stored forward pass. `states[t]` is the state entering step `t`, so
/// `states[0] = 0` and `states[T]` is the final state.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub inputs: Array3<f64>,
    pub drive: Array3<f64>,
    pub states: Array3<f64>,
    pub outputs: Array3<f64>,
}

impl Trajectory {
    pub fn n_steps(&self) -> usize {
        self.drive.dim().0
    }

    /// Hidden states after each step, `T x B x N`.
    pub fn hidden(&self) -> ArrayView3<'_, f64> {
        self.states.slice(s![1.., .., ..])
    }

    pub fn final_state(&self) -> ArrayView2<'_, f64> {
        self.states.index_axis(Axis(0), self.n_steps())
    }
}

/// Converts `B x T x F` to standard-layout `T x B x F`.
pub fn to_time_major(a: ArrayView3<f64>) -> Array3<f64> {
    a.permuted_axes([1, 0, 2]).as_standard_layout().into_owned()
}

pub fn to_batch_major(a: ArrayView3<f64>) -> Array3<f64> {
    to_time_major(a)
}

fn flat(a: &Array3<f64>) -> ArrayView2<'_, f64> {
    let (t, b, f) = a.dim();
    a.view().into_shape_with_order((t * b, f)).expect("standard layout")
}

/// Simulates time-major `inputs` (`T x B x n_in`) from `z(0) = 0`.
pub fn forward_time_major(p: &LeakyRnnParams, inputs: Array3<f64>) -> Result<Trajectory> {
    let (t_len, b, n_in) = inputs.dim();
    if n_in != p.n_in() {
        return Err(Error::DimensionMismatch {
            expected: p.n_in(),
            got: n_in,
        });
    }
    let n = p.n_hidden();
    let alpha = p.alpha();

    let mut drive_flat = Array2::zeros((t_len * b, n));
    drive_flat.assign(&p.b.broadcast((t_len * b, n)).expect("bias broadcast"));
    general_mat_mul(1.0, &flat(&inputs), &p.w_in.t(), 1.0, &mut drive_flat);
    let mut drive = drive_flat.into_shape_with_order((t_len, b, n)).expect("reshape");

    let mut states = Array3::zeros((t_len + 1, b, n));
    for t in 0..t_len {
        let (prev, mut rest) = states.view_mut().split_at(Axis(0), t + 1);
        let z = prev.index_axis(Axis(0), t);
        let mut a = drive.index_axis_mut(Axis(0), t);
        general_mat_mul(1.0, &z, &p.w_rec.t(), 1.0, &mut a);
        let mut next = rest.index_axis_mut(Axis(0), 0);
        Zip::from(&mut next)
            .and(&z)
            .and(&a)
            .for_each(|n, &z, &a| *n = (1.0 - alpha) * z + alpha * a.max(0.0));
    }
    if !states.iter().all(|v| v.is_finite()) {
        return Err(Error::Divergence("non-finite hidden state".into()));
    }

    let hidden = states.slice(s![1.., .., ..]);
    let hidden_flat = hidden.into_shape_with_order((t_len * b, n)).expect("contiguous");
    let mut outputs = hidden_flat.dot(&p.w_out.t());
    let g = p.readout;
    outputs.mapv_inplace(|v| g.apply(v));
    let outputs = outputs
        .into_shape_with_order((t_len, b, p.n_out()))
        .expect("reshape");
    Ok(Trajectory {
        inputs,
        drive,
        states,
        outputs,
    })
}

/// Batch-major convenience wrapper: `inputs` is `B x T x n_in`.
pub fn forward_batch(p: &LeakyRnnParams, inputs: ArrayView3<f64>) -> Result<Trajectory> {
    forward_time_major(p, to_time_major(inputs))
}

/// Single trial: `inputs` is `T x n_in`; returns states and outputs, `T x N`
/// and `T x N_out`.
pub fn forward(p: &LeakyRnnParams, inputs: ArrayView2<f64>) -> Result<(Array2<f64>, Array2<f64>)> {
    let (t, f) = inputs.dim();
    let x = inputs
        .to_owned()
        .into_shape_with_order((t, 1, f))
        .expect("reshape");
    let traj = forward_time_major(p, x)?;
    let states = traj.hidden().index_axis(Axis(1), 0).to_owned();
    let outputs = traj.outputs.index_axis(Axis(1), 0).to_owned();
    Ok((states, outputs))
}

/// Mean squared error over the entries where `mask` is nonzero.
pub fn loss_mse<D: ndarray::Dimension>(
    outputs: &ndarray::Array<f64, D>,
    targets: &ndarray::Array<f64, D>,
    mask: &ndarray::Array<f64, D>,
) -> Result<f64> {
    if outputs.shape() != targets.shape() || outputs.shape() != mask.shape() {
        return Err(Error::DimensionMismatch {
            expected: outputs.len(),
            got: targets.len().min(mask.len()),
        });
    }
    let count: f64 = mask.sum();
    if count <= 0.0 {
        return Err(Error::EmptyMask);
    }
    let mut sse = 0.0;
    Zip::from(outputs).and(targets).and(mask).for_each(|&y, &t, &m| {
        let e = y - t;
        sse += m * e * e;
    });
    Ok(sse / count)
}

/// Loss and exact gradients for time-major inputs, targets and mask.
pub fn backward_time_major(
    p: &LeakyRnnParams,
    inputs: Array3<f64>,
    targets: ArrayView3<f64>,
    mask: ArrayView3<f64>,
) -> Result<(f64, Gradients, Trajectory)> {
    let traj = forward_time_major(p, inputs)?;
    let (t_len, b, n_out) = traj.outputs.dim();
    if targets.dim() != (t_len, b, n_out) || mask.dim() != (t_len, b, n_out) {
        return Err(Error::DimensionMismatch {
            expected: t_len * b * n_out,
            got: targets.len(),
        });
    }
    let count: f64 = mask.sum();
    if count <= 0.0 {
        return Err(Error::EmptyMask);
    }
    let n = p.n_hidden();
    let alpha = p.alpha();
    let g = p.readout;

    let mut sse = 0.0;
    let mut d_out = Array3::zeros((t_len, b, n_out));
    let scale = 2.0 / count;
    Zip::from(&mut d_out)
        .and(&traj.outputs)
        .and(&targets)
        .and(&mask)
        .for_each(|d, &y, &tg, &m| {
            let e = y - tg;
            sse += m * e * e;
            *d = scale * m * e * g.slope_from_output(y);
        });
    let loss = sse / count;
    if !loss.is_finite() {
        return Err(Error::Divergence(format!("loss {loss}")));
    }

    let mut grads = Gradients::zeros_like(p);
    let d_out_flat = flat(&d_out);
    let hidden_flat = traj
        .hidden()
        .into_shape_with_order((t_len * b, n))
        .expect("contiguous");
    general_mat_mul(1.0, &d_out_flat.t(), &hidden_flat, 0.0, &mut grads.w_out);
    let dz_out = d_out_flat.dot(&p.w_out);
    let dz_out = dz_out.into_shape_with_order((t_len, b, n)).expect("reshape");

    let mut d_drive = Array3::zeros((t_len, b, n));
    let mut dz = Array2::<f64>::zeros((b, n));
    for t in (0..t_len).rev() {
        dz += &dz_out.index_axis(Axis(0), t);
        let mut da = d_drive.index_axis_mut(Axis(0), t);
        Zip::from(&mut da)
            .and(&dz)
            .and(traj.drive.index_axis(Axis(0), t))
            .for_each(|d, &dz, &a| *d = if a > 0.0 { alpha * dz } else { 0.0 });
        dz *= 1.0 - alpha;
        general_mat_mul(1.0, &da, &p.w_rec, 1.0, &mut dz);
    }

    let dd_flat = flat(&d_drive);
    let prev = traj
        .states
        .slice(s![..t_len, .., ..])
        .into_shape_with_order((t_len * b, n))
        .expect("contiguous");
    general_mat_mul(1.0, &dd_flat.t(), &prev, 0.0, &mut grads.w_rec);
    general_mat_mul(1.0, &dd_flat.t(), &flat(&traj.inputs), 0.0, &mut grads.w_in);
    grads.b = dd_flat.sum_axis(Axis(0));
    Ok((loss, grads, traj))
}

/// Loss and gradients for batch-major arrays (`B x T x ...`).
pub fn backward(
    p: &LeakyRnnParams,
    inputs: ArrayView3<f64>,
    targets: ArrayView3<f64>,
    mask: ArrayView3<f64>,
) -> Result<(f64, Gradients)> {
    let tgt = to_time_major(targets);
    let msk = to_time_major(mask);
    let (loss, grads, _) = backward_time_major(p, to_time_major(inputs), tgt.view(), msk.view())?;
    Ok((loss, grads))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::params::{Leak, NetShape, Readout};
    use crate::seed;
    use ndarray::{array, Array1};
    use rand::Rng as _;

    fn shape(n: usize, n_in: usize, n_out: usize, dt: f64, leak: Leak, readout: Readout) -> NetShape {
        NetShape {
            n_hidden: n,
            n_in,
            n_out,
            tau: 100.0,
            dt,
            leak,
            readout,
        }
    }

    #[test]
    fn step_examples() {
        let p = LeakyRnnParams::zeros(shape(3, 3, 1, 100.0, Leak::Leaky, Readout::Tanh)).unwrap();
        let z = array![0.4, 1.0, 2.0];
        assert_eq!(step(&p, z.view(), array![1.0, 1.0, 1.0].view()).unwrap(), Array1::<f64>::zeros(3));

        let mut id = p.clone();
        id.w_in = ndarray::Array2::eye(3);
        let out = step(&id, z.view(), array![0.5, -0.3, 0.0].view()).unwrap();
        assert_eq!(out, array![0.5, 0.0, 0.0]);

        let half = LeakyRnnParams::zeros(shape(3, 3, 1, 50.0, Leak::Leaky, Readout::Tanh)).unwrap();
        assert_eq!(step(&half, z.view(), array![0.0, 0.0, 0.0].view()).unwrap(), &z / 2.0);
    }

    #[test]
    fn zero_weights_give_zero_outputs() {
        let p = LeakyRnnParams::zeros(shape(4, 2, 3, 100.0, Leak::Leaky, Readout::Tanh)).unwrap();
        let x = ndarray::Array2::from_elem((6, 2), 0.7);
        let (_, y) = forward(&p, x.view()).unwrap();
        assert!(y.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_unit_integrator_sums_inputs() {
        let mut p = LeakyRnnParams::zeros(shape(1, 1, 1, 20.0, Leak::Leaky, Readout::Identity)).unwrap();
        p.w_rec[[0, 0]] = 1.0;
        p.w_in[[0, 0]] = 1.0;
        p.w_out[[0, 0]] = 1.0;
        let xs = [0.3, 0.1, 0.0, 0.5, 0.2];
        let x = ndarray::Array2::from_shape_vec((5, 1), xs.to_vec()).unwrap();
        let (_, y) = forward(&p, x.view()).unwrap();
        let mut acc = 0.0;
        for (t, &v) in xs.iter().enumerate() {
            acc += 0.2 * v;
            assert!((y[[t, 0]] - acc).abs() < 1e-14);
        }
    }

    #[test]
    fn loss_examples() {
        let y = array![[1.0, 2.0], [3.0, 4.0]];
        let m = ndarray::Array2::ones((2, 2));
        assert_eq!(loss_mse(&y, &y, &m).unwrap(), 0.0);
        assert!((loss_mse(&(&y + 0.3), &y, &m).unwrap() - 0.09).abs() < 1e-15);
        let none = ndarray::Array2::<f64>::zeros((2, 2));
        assert!(matches!(loss_mse(&y, &y, &none), Err(Error::EmptyMask)));
    }

    #[test]
    fn identity_readout_gradient_is_outer_product() {
        let mut rng = seed::rng(3);
        let p = LeakyRnnParams::init(shape(5, 3, 2, 100.0, Leak::Leaky, Readout::Identity), &mut rng).unwrap();
        let x = Array3::from_shape_fn((2, 4, 3), |_| rng.random_range(-1.0..1.0));
        let tg = Array3::from_shape_fn((2, 4, 2), |_| rng.random_range(-1.0..1.0));
        let mask = Array3::ones((2, 4, 2));
        let (_, grads) = backward(&p, x.view(), tg.view(), mask.view()).unwrap();
        let mut expect = ndarray::Array2::<f64>::zeros((2, 5));
        for i in 0..2 {
            let (z, y) = forward(&p, x.index_axis(Axis(0), i)).unwrap();
            for t in 0..4 {
                let e = &y.row(t) - &tg.slice(s![i, t, ..]);
                for o in 0..2 {
                    for k in 0..5 {
                        expect[[o, k]] += 2.0 / 16.0 * e[o] * z[[t, k]];
                    }
                }
            }
        }
        assert!((&grads.w_out - &expect).iter().all(|d| d.abs() < 1e-14));
    }

    #[test]
    fn zero_loss_gives_zero_gradients() {
        let mut rng = seed::rng(5);
        let p = LeakyRnnParams::init(shape(4, 2, 1, 100.0, Leak::Leaky, Readout::Tanh), &mut rng).unwrap();
        let x = Array3::from_shape_fn((3, 5, 2), |_| rng.random_range(-1.0..1.0));
        let traj = forward_batch(&p, x.view()).unwrap();
        let targets = to_batch_major(traj.outputs.view());
        let mask = Array3::ones(targets.raw_dim());
        let (loss, grads) = backward(&p, x.view(), targets.view(), mask.view()).unwrap();
        assert_eq!(loss, 0.0);
        assert_eq!(grads.norm(), 0.0);
    }

    #[test]
    fn states_are_nonnegative() {
        let mut rng = seed::rng(8);
        for dt in [100.0, 30.0] {
            let p = LeakyRnnParams::init(shape(16, 3, 2, dt, Leak::Leaky, Readout::Tanh), &mut rng).unwrap();
            let x = Array3::from_shape_fn((4, 12, 3), |_| rng.random_range(-2.0..2.0));
            let traj = forward_batch(&p, x.view()).unwrap();
            assert!(traj.states.iter().all(|&v| v >= 0.0));
        }
    }

    #[test]
    fn divergence_is_reported() {
        let mut p = LeakyRnnParams::zeros(shape(2, 1, 1, 100.0, Leak::Vanilla, Readout::Tanh)).unwrap();
        p.w_rec.fill(1e200);
        p.w_in.fill(1e200);
        let x = ndarray::Array2::from_elem((10, 1), 1.0);
        assert!(matches!(forward(&p, x.view()), Err(Error::Divergence(_))));
    }
}
