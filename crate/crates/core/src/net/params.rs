use ndarray::{Array1, Array2};
use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::seed::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Leak {
    /// Forward-Euler update with factor `dt / tau`.
    Leaky,
    /// `z' = [W_rec z + W_in x + b]_+`.
    Vanilla,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Readout {
    Tanh,
    /// `5 tanh(z)`, matched to accumulators bounded at +-5.
    ScaledTanh5,
    Identity,
}

impl Readout {
    pub fn apply(self, v: f64) -> f64 {
        match self {
            Readout::Tanh => v.tanh(),
            Readout::ScaledTanh5 => 5.0 * v.tanh(),
            Readout::Identity => v,
        }
    }

    /// Derivative expressed through the output `y = g(v)`.
    pub fn slope_from_output(self, y: f64) -> f64 {
        match self {
            Readout::Tanh => 1.0 - y * y,
            Readout::ScaledTanh5 => {
                let u = y / 5.0;
                5.0 * (1.0 - u * u)
            }
            Readout::Identity => 1.0,
        }
    }
}

/// Initial weight distribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitScheme {
    /// Gaussian `W_rec` with std `1/sqrt(N)`, uniform `W_in` and `W_out` in
    /// `+-1/sqrt(fan_in)`, zero bias.
    #[default]
    Gaussian,
    /// Random orthogonal `W_rec`, otherwise as `Gaussian`.
    Orthogonal,
    /// Every tensor, bias included, uniform in `+-1/sqrt(fan_in)`.
    Uniform,
}

/// Weights and time constants of a rectified recurrent network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeakyRnnParams {
    /// `N x N`
    pub w_rec: Array2<f64>,
    /// `N x n_in`
    pub w_in: Array2<f64>,
    /// `N`
    pub b: Array1<f64>,
    /// `N_out x N`
    pub w_out: Array2<f64>,
    pub tau: f64,
    pub dt: f64,
    pub leak: Leak,
    pub readout: Readout,
}

/// Everything needed to shape and initialize a network.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NetShape {
    pub n_hidden: usize,
    pub n_in: usize,
    pub n_out: usize,
    pub tau: f64,
    pub dt: f64,
    pub leak: Leak,
    pub readout: Readout,
}

impl LeakyRnnParams {
    pub fn zeros(shape: NetShape) -> Result<Self> {
        if !(shape.tau > 0.0 && shape.dt > 0.0 && shape.dt <= shape.tau) {
            return Err(invalid(format!("need 0 < dt <= tau, got dt = {} tau = {}", shape.dt, shape.tau)));
        }
        let n = shape.n_hidden;
        Ok(Self {
            w_rec: Array2::zeros((n, n)),
            w_in: Array2::zeros((n, shape.n_in)),
            b: Array1::zeros(n),
            w_out: Array2::zeros((shape.n_out, n)),
            tau: shape.tau,
            dt: shape.dt,
            leak: shape.leak,
            readout: shape.readout,
        })
    }

    pub fn init(shape: NetShape, rng: &mut Rng) -> Result<Self> {
        Self::init_with(shape, InitScheme::Gaussian, rng)
    }

    pub fn init_with(shape: NetShape, scheme: InitScheme, rng: &mut Rng) -> Result<Self> {
        let mut p = Self::zeros(shape)?;
        let n = shape.n_hidden as f64;
        let rec_scale = 1.0 / n.sqrt();
        match scheme {
            InitScheme::Gaussian => p.w_rec.mapv_inplace(|_| rec_scale * rng.sample::<f64, _>(StandardNormal)),
            InitScheme::Orthogonal => {
                let g = Array2::from_shape_fn((shape.n_hidden, shape.n_hidden), |_| rng.sample::<f64, _>(StandardNormal));
                let qr = crate::linalg::to_dmatrix(g.view()).qr();
                let (q, r) = (qr.q(), qr.r());
                // Sign-fix columns so the draw is Haar distributed.
                p.w_rec = Array2::from_shape_fn(g.raw_dim(), |(i, j)| q[(i, j)] * r[(j, j)].signum());
            }
            InitScheme::Uniform => p.w_rec.mapv_inplace(|_| rng.random_range(-rec_scale..rec_scale)),
        }
        let in_scale = 1.0 / (shape.n_in.max(1) as f64).sqrt();
        p.w_in.mapv_inplace(|_| rng.random_range(-in_scale..in_scale));
        if scheme == InitScheme::Uniform {
            p.b.mapv_inplace(|_| rng.random_range(-rec_scale..rec_scale));
        }
        let out_scale = 1.0 / n.sqrt();
        p.w_out.mapv_inplace(|_| rng.random_range(-out_scale..out_scale));
        Ok(p)
    }

    pub fn shape(&self) -> NetShape {
        NetShape {
            n_hidden: self.n_hidden(),
            n_in: self.n_in(),
            n_out: self.n_out(),
            tau: self.tau,
            dt: self.dt,
            leak: self.leak,
            readout: self.readout,
        }
    }

    pub fn n_hidden(&self) -> usize {
        self.w_rec.nrows()
    }

    pub fn n_in(&self) -> usize {
        self.w_in.ncols()
    }

    pub fn n_out(&self) -> usize {
        self.w_out.nrows()
    }

    /// Fraction of the previous state replaced per step.
    pub fn alpha(&self) -> f64 {
        match self.leak {
            Leak::Leaky => self.dt / self.tau,
            Leak::Vanilla => 1.0,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|v| v.is_finite()))
    }

    /// Trainable tensors in checkpoint order: `w_rec, w_in, b, w_out`.
    pub fn tensors(&self) -> [&[f64]; 4] {
        [
            self.w_rec.as_slice().expect("standard layout"),
            self.w_in.as_slice().expect("standard layout"),
            self.b.as_slice().expect("standard layout"),
            self.w_out.as_slice().expect("standard layout"),
        ]
    }

    pub fn tensors_mut(&mut self) -> [&mut [f64]; 4] {
        [
            self.w_rec.as_slice_mut().expect("standard layout"),
            self.w_in.as_slice_mut().expect("standard layout"),
            self.b.as_slice_mut().expect("standard layout"),
            self.w_out.as_slice_mut().expect("standard layout"),
        ]
    }
}

/// Gradients of the loss, shaped like the trainable tensors.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub w_rec: Array2<f64>,
    pub w_in: Array2<f64>,
    pub b: Array1<f64>,
    pub w_out: Array2<f64>,
}

impl Gradients {
    pub fn zeros_like(p: &LeakyRnnParams) -> Self {
        Self {
            w_rec: Array2::zeros(p.w_rec.raw_dim()),
            w_in: Array2::zeros(p.w_in.raw_dim()),
            b: Array1::zeros(p.b.raw_dim()),
            w_out: Array2::zeros(p.w_out.raw_dim()),
        }
    }

    pub fn tensors(&self) -> [&[f64]; 4] {
        [
            self.w_rec.as_slice().expect("standard layout"),
            self.w_in.as_slice().expect("standard layout"),
            self.b.as_slice().expect("standard layout"),
            self.w_out.as_slice().expect("standard layout"),
        ]
    }

    pub fn tensors_mut(&mut self) -> [&mut [f64]; 4] {
        [
            self.w_rec.as_slice_mut().expect("standard layout"),
            self.w_in.as_slice_mut().expect("standard layout"),
            self.b.as_slice_mut().expect("standard layout"),
            self.w_out.as_slice_mut().expect("standard layout"),
        ]
    }

    pub fn norm(&self) -> f64 {
        self.tensors()
            .iter()
            .flat_map(|t| t.iter())
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|v| v.is_finite()))
    }

    /// Rescales so the global norm is at most `max_norm`; returns the norm
    /// before clipping.
    pub fn clip_norm(&mut self, max_norm: f64) -> f64 {
        let norm = self.norm();
        if norm > max_norm && norm > 0.0 {
            let s = max_norm / norm;
            for t in self.tensors_mut() {
                t.iter_mut().for_each(|v| *v *= s);
            }
        }
        norm
    }
}
