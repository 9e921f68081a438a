use std::f64::consts::PI;

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::rank_and_condition;
use crate::seed::Rng;

/// How the normals of a linear bank are laid out.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BankMode {
    /// Normals at angles `k pi / n`, offsets zero (D = 2 only).
    #[serde(rename = "uniform_angles_2d")]
    UniformAngles2d,
    /// Normals uniform on the unit sphere, offsets uniform in [-0.25, 0.25].
    RandomHyperplanes,
    /// Lines through the origin that only cut quadrants 1 and 3 (D = 2 only).
    #[serde(rename = "quadrants_13_only")]
    Quadrants13Only,
}

/// Linear classification boundaries `c_i^T x = b_i` with unit normals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearBank {
    normals: Array2<f64>,
    offsets: Array1<f64>,
}

/// Multiplicative boundaries `x_1 x_2 = gamma_j` (D = 2 only).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProductBank {
    pub gammas: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TaskBank {
    Linear(LinearBank),
    Multiplicative(ProductBank),
}

impl LinearBank {
    /// Builds a bank, normalizing each row of `normals` to unit length.
    pub fn new(normals: Array2<f64>, offsets: Array1<f64>) -> Result<Self> {
        let (n, d) = normals.dim();
        if n == 0 || d == 0 {
            return Err(invalid("a bank needs at least one task and one dimension"));
        }
        if offsets.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: offsets.len(),
            });
        }
        let mut normals = normals;
        for mut row in normals.axis_iter_mut(Axis(0)) {
            let norm = row.dot(&row).sqrt();
            if !(norm.is_finite() && norm > 0.0) {
                return Err(invalid("boundary normals must be finite and non-zero"));
            }
            // Leave rows that are already unit length bit-for-bit untouched.
            if (norm - 1.0).abs() > 4.0 * f64::EPSILON {
                row /= norm;
            }
        }
        if normals.iter().chain(offsets.iter()).any(|v| !v.is_finite()) {
            return Err(invalid("non-finite bank entries"));
        }
        Ok(Self { normals, offsets })
    }

    pub fn normals(&self) -> ArrayView2<'_, f64> {
        self.normals.view()
    }

    pub fn offsets(&self) -> &Array1<f64> {
        &self.offsets
    }

    pub fn n_tasks(&self) -> usize {
        self.normals.nrows()
    }

    pub fn dim(&self) -> usize {
        self.normals.ncols()
    }

    /// Numerical rank and condition number of the normal matrix.
    pub fn rank_and_condition(&self) -> (usize, f64) {
        rank_and_condition(self.normals.view())
    }

    /// True when the normals span the latent space.
    pub fn spans_latent_space(&self) -> bool {
        self.rank_and_condition().0 == self.dim()
    }

    /// Signed projection distances `C x - b` for each row of `latents`.
    pub fn signed_distances(&self, latents: ArrayView2<f64>) -> Result<Array2<f64>> {
        if latents.ncols() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: latents.ncols(),
            });
        }
        Ok(latents.dot(&self.normals.t()) - &self.offsets)
    }
}

impl TaskBank {
    pub fn n_tasks(&self) -> usize {
        match self {
            TaskBank::Linear(b) => b.n_tasks(),
            TaskBank::Multiplicative(b) => b.gammas.len(),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            TaskBank::Linear(b) => b.dim(),
            TaskBank::Multiplicative(_) => 2,
        }
    }

    /// Ground-truth labels in {-1, +1}, shape `B x n_tasks`.
    pub fn labels(&self, latents: ArrayView2<f64>) -> Result<Array2<f64>> {
        match self {
            TaskBank::Linear(b) => classify(latents, b),
            TaskBank::Multiplicative(b) => multiplicative_targets(latents, &b.gammas),
        }
    }

    pub fn as_linear(&self) -> Option<&LinearBank> {
        match self {
            TaskBank::Linear(b) => Some(b),
            TaskBank::Multiplicative(_) => None,
        }
    }
}

pub fn make_linear_taskbank(d: usize, n_tasks: usize, mode: BankMode, rng: &mut Rng) -> Result<LinearBank> {
    if n_tasks == 0 || d == 0 {
        return Err(invalid("n_tasks and D must be at least 1"));
    }
    let bank = match mode {
        BankMode::UniformAngles2d => {
            if d != 2 {
                return Err(invalid("uniform_angles_2d requires D = 2"));
            }
            let normals = Array2::from_shape_fn((n_tasks, 2), |(k, j)| {
                let theta = k as f64 * PI / n_tasks as f64;
                if j == 0 {
                    theta.cos()
                } else {
                    theta.sin()
                }
            });
            LinearBank::new(normals, Array1::zeros(n_tasks))?
        }
        BankMode::Quadrants13Only => {
            if d != 2 {
                return Err(invalid("quadrants_13_only requires D = 2"));
            }
            // Boundary direction (cos a, sin a) with a in (0, pi/2); the
            // normal (-sin a, cos a) keeps quadrant 2 positive and 4 negative.
            let normals = Array2::from_shape_fn((n_tasks, 2), |(k, j)| {
                let a = (k as f64 + 0.5) * (PI / 2.0) / n_tasks as f64;
                if j == 0 {
                    -a.sin()
                } else {
                    a.cos()
                }
            });
            LinearBank::new(normals, Array1::zeros(n_tasks))?
        }
        BankMode::RandomHyperplanes => {
            let mut normals = Array2::zeros((n_tasks, d));
            for v in normals.iter_mut() {
                *v = rng.sample(StandardNormal);
            }
            let offsets = Array1::from_shape_fn(n_tasks, |_| rng.random_range(-0.25..=0.25));
            LinearBank::new(normals, offsets)?
        }
    };
    if !bank.spans_latent_space() {
        log::warn!("task bank normals do not span the {d}-dimensional latent space");
    }
    Ok(bank)
}

/// Labels `+1` where `c_i^T x > b_i`, else `-1` (boundary points get `-1`).
pub fn classify(latents: ArrayView2<f64>, bank: &LinearBank) -> Result<Array2<f64>> {
    Ok(bank
        .signed_distances(latents)?
        .mapv(|k| if k > 0.0 { 1.0 } else { -1.0 }))
}

/// Labels `+1` where `x_1 x_2 > gamma_j`, else `-1`.
pub fn multiplicative_targets(latents: ArrayView2<f64>, gammas: &[f64]) -> Result<Array2<f64>> {
    if latents.ncols() != 2 {
        return Err(invalid("multiplicative tasks require D = 2"));
    }
    Ok(Array2::from_shape_fn((latents.nrows(), gammas.len()), |(i, j)| {
        if latents[[i, 0]] * latents[[i, 1]] > gammas[j] {
            1.0
        } else {
            -1.0
        }
    }))
}

pub const PRODUCT_GAMMA_MIN: f64 = 0.005;
pub const PRODUCT_GAMMA_MAX: f64 = 0.16;

/// The default 48-curve multiplicative bank: 24 log-spaced magnitudes in
/// [0.005, 0.16], alternately assigned to quadrants 1 and 3 (positive gamma)
/// and mirrored to quadrants 2 and 4 (negative gamma), 12 per quadrant.
pub fn default_product_bank() -> ProductBank {
    let n = 24;
    let (lo, hi) = (PRODUCT_GAMMA_MIN.ln(), PRODUCT_GAMMA_MAX.ln());
    let magnitudes: Vec<f64> = (0..n)
        .map(|i| (lo + (hi - lo) * i as f64 / (n - 1) as f64).exp())
        .collect();
    let mut gammas: Vec<f64> = magnitudes.clone();
    gammas.extend(magnitudes.iter().map(|m| -m));
    ProductBank { gammas }
}

/// Which quadrant a default-bank curve is drawn in (1-based).
pub fn product_curve_quadrant(bank: &ProductBank, j: usize) -> u8 {
    let n = bank.gammas.len() / 2;
    let k = j % n;
    match (bank.gammas[j] > 0.0, k % 2 == 0) {
        (true, true) => 1,
        (true, false) => 3,
        (false, true) => 2,
        (false, false) => 4,
    }
}

/// CSV with one boundary per row: `c_1,...,c_D,b`.
pub fn bank_to_csv(bank: &LinearBank) -> String {
    let d = bank.dim();
    let mut out = String::new();
    let header: Vec<String> = (1..=d).map(|i| format!("c_{i}")).chain(["b".into()]).collect();
    out.push_str(&header.join(","));
    out.push('\n');
    for (row, b) in bank.normals.axis_iter(Axis(0)).zip(bank.offsets.iter()) {
        let fields: Vec<String> = row.iter().chain(std::iter::once(b)).map(|v| format!("{v:e}")).collect();
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

pub fn bank_from_csv(text: &str) -> Result<LinearBank> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().ok_or_else(|| Error::Format("empty bank CSV".into()))?;
    let d = header.split(',').count().checked_sub(1).filter(|&d| d > 0)
        .ok_or_else(|| Error::Format("bank CSV needs at least c_1 and b".into()))?;
    let mut normals = Vec::new();
    let mut offsets = Vec::new();
    for line in lines {
        let vals: Vec<f64> = line
            .split(',')
            .map(|f| f.trim().parse::<f64>().map_err(|e| Error::Format(format!("{e}: {f}"))))
            .collect::<Result<_>>()?;
        if vals.len() != d + 1 {
            return Err(Error::Format(format!("expected {} fields, got {}", d + 1, vals.len())));
        }
        normals.extend_from_slice(&vals[..d]);
        offsets.push(vals[d]);
    }
    let n = offsets.len();
    let normals = Array2::from_shape_vec((n, d), normals).map_err(|e| Error::Format(e.to_string()))?;
    LinearBank::new(normals, Array1::from(offsets))
}
