use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::net::params::{Gradients, LeakyRnnParams};

/// Learning rate for fixed reaction time training.
pub const LR_FIXED_RT: f64 = 1e-3;
/// Learning rate for free reaction time training.
pub const LR_FREE_RT: f64 = 3e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub step: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(params: &LeakyRnnParams, lr: f64) -> Self {
        let zeros: Vec<Vec<f64>> = params.tensors().iter().map(|t| vec![0.0; t.len()]).collect();
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }

    /// One bias-corrected Adam step, in place.
    pub fn update(&mut self, params: &mut LeakyRnnParams, grads: &Gradients) -> Result<()> {
        if !grads.is_finite() {
            return Err(Error::Divergence("non-finite gradient".into()));
        }
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        let (b1, b2, lr, eps) = (self.beta1, self.beta2, self.lr, self.eps);
        for (((p, g), m), v) in params
            .tensors_mut()
            .into_iter()
            .zip(grads.tensors())
            .zip(self.m.iter_mut())
            .zip(self.v.iter_mut())
        {
            for i in 0..p.len() {
                let gi = g[i];
                m[i] = b1 * m[i] + (1.0 - b1) * gi;
                v[i] = b2 * v[i] + (1.0 - b2) * gi * gi;
                let mhat = m[i] / c1;
                let vhat = v[i] / c2;
                p[i] -= lr * mhat / (vhat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::params::{Leak, NetShape, Readout};
    use crate::seed;

    fn params() -> LeakyRnnParams {
        let shape = NetShape {
            n_hidden: 4,
            n_in: 3,
            n_out: 2,
            tau: 100.0,
            dt: 100.0,
            leak: Leak::Leaky,
            readout: Readout::Tanh,
        };
        LeakyRnnParams::init(shape, &mut seed::rng(1)).unwrap()
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let mut p = params();
        let before = p.clone();
        let mut adam = AdamState::new(&p, LR_FIXED_RT);
        let g = Gradients::zeros_like(&p);
        adam.update(&mut p, &g).unwrap();
        assert_eq!(p, before);
    }

    #[test]
    fn first_step_moves_by_lr_times_sign() {
        let mut p = params();
        let before = p.clone();
        let mut g = Gradients::zeros_like(&p);
        g.w_rec.fill(0.37);
        g.w_out.fill(-2.0);
        let mut adam = AdamState::new(&p, LR_FREE_RT);
        adam.update(&mut p, &g).unwrap();
        let d_rec = &before.w_rec - &p.w_rec;
        let d_out = &before.w_out - &p.w_out;
        assert!(d_rec.iter().all(|d| (d - 3e-3).abs() < 1e-9));
        assert!(d_out.iter().all(|d| (d + 3e-3).abs() < 1e-9));
        assert_eq!(p.w_in, before.w_in);
    }

    #[test]
    fn rejects_non_finite_gradient() {
        let mut p = params();
        let mut g = Gradients::zeros_like(&p);
        g.b[0] = f64::NAN;
        let mut adam = AdamState::new(&p, LR_FIXED_RT);
        assert!(adam.update(&mut p, &g).is_err());
    }
}
