use ndarray::{Array1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::tasks::bank::LinearBank;
use crate::theory::normal::{phi, phi_inv};

/// Probabilities are kept inside `[PROB_CLAMP, 1 - PROB_CLAMP]`.
pub const PROB_CLAMP: f64 = 1e-9;

/// Running mean of the first `t` observations; the posterior over `x*` is
/// `N(mu, sigma^2 / t I)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorEstimate {
    pub mu: Array1<f64>,
    pub t: usize,
    pub sigma: f64,
}

impl PosteriorEstimate {
    pub fn new(mu: Array1<f64>, t: usize, sigma: f64) -> Result<Self> {
        if t < 1 {
            return Err(invalid("posterior needs t >= 1"));
        }
        Ok(Self { mu, t, sigma })
    }

    /// Per-component posterior variance `sigma^2 / t`.
    pub fn variance(&self) -> f64 {
        self.sigma * self.sigma / self.t as f64
    }
}

/// `observations` is `T x D`.
pub fn running_mean(observations: ArrayView2<f64>, t: usize, sigma: f64) -> Result<PosteriorEstimate> {
    let total = observations.nrows();
    if t < 1 || t > total {
        return Err(invalid(format!("t = {t} outside 1..={total}")));
    }
    let mu = observations
        .slice(ndarray::s![..t, ..])
        .mean_axis(Axis(0))
        .expect("t >= 1 rows");
    PosteriorEstimate::new(mu, t, sigma)
}

fn clamp_prob(p: f64) -> f64 {
    p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP)
}

/// Probability that `x*` lies on the positive side of one boundary given a
/// signed distance `k` of the posterior mean.
pub fn side_prob(k: f64, t: usize, sigma: f64) -> f64 {
    clamp_prob(phi(k * (t as f64).sqrt() / sigma))
}

/// `y_i = Phi((c_i^T mu - b_i) sqrt(t) / sigma)`, clamped into the open interval.
pub fn class_prob(est: &PosteriorEstimate, bank: &LinearBank) -> Result<Array1<f64>> {
    if !(est.sigma > 0.0) {
        return Err(invalid("class probabilities need sigma > 0"));
    }
    if est.mu.len() != bank.dim() {
        return Err(Error::DimensionMismatch {
            expected: bank.dim(),
            got: est.mu.len(),
        });
    }
    let k = bank.normals().dot(&est.mu) - bank.offsets();
    Ok(k.mapv(|k| side_prob(k, est.t, est.sigma)))
}

/// Inverts [`side_prob`]: `k = sigma / sqrt(t) * Phi^-1(y)`.
pub fn prob_to_dist(y_hat: f64, t: usize, sigma: f64) -> Result<f64> {
    if !(y_hat > 0.0 && y_hat < 1.0) {
        return Err(Error::ProbabilityOutOfRange(y_hat));
    }
    if t < 1 || !(sigma > 0.0) {
        return Err(invalid("prob_to_dist needs t >= 1 and sigma > 0"));
    }
    Ok(sigma / (t as f64).sqrt() * phi_inv(clamp_prob(y_hat))?)
}
