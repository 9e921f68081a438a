//! Frozen random feed-forward encoder standing in for a perceptual system.

use ndarray::{Array1, Array2, ArrayView2};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::seed;

pub const ENCODER_WIDTHS: [usize; 3] = [100, 100, 40];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Layer {
    weight: Array2<f64>,
    bias: Array1<f64>,
}

/// Three dense layers, widths 100, 100, 40, rectified hidden layers and a
/// linear output. Weights and biases are uniform in `±1/sqrt(fan_in)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderParams {
    seed: u64,
    input_dim: usize,
    layers: Vec<Layer>,
}

pub fn build_encoder(seed: u64, input_dim: usize) -> EncoderParams {
    let mut rng = seed::rng(seed);
    let mut fan_in = input_dim;
    let mut layers = Vec::with_capacity(ENCODER_WIDTHS.len());
    for &width in &ENCODER_WIDTHS {
        let scale = 1.0 / (fan_in as f64).sqrt();
        let weight = Array2::from_shape_fn((width, fan_in), |_| rng.random_range(-scale..scale));
        let bias = Array1::from_shape_fn(width, |_| rng.random_range(-scale..scale));
        layers.push(Layer { weight, bias });
        fan_in = width;
    }
    EncoderParams {
        seed,
        input_dim,
        layers,
    }
}

impl EncoderParams {
    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        ENCODER_WIDTHS[ENCODER_WIDTHS.len() - 1]
    }

    /// Encodes each row of `x` (`M x D`) into `M x 40` features.
    pub fn encode_rows(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let last = self.layers.len() - 1;
        let mut h = x.to_owned();
        for (i, layer) in self.layers.iter().enumerate() {
            h = h.dot(&layer.weight.t()) + &layer.bias;
            if i < last {
                h.mapv_inplace(|v| v.max(0.0));
            }
        }
        h
    }

    pub fn encode(&self, x: &[f64]) -> Array1<f64> {
        let row = ArrayView2::from_shape((1, x.len()), x).expect("contiguous slice");
        self.encode_rows(row).row(0).to_owned()
    }
}
