use rand::Rng as _;
use rand_distr::StandardNormal;

use crate::error::{invalid, Result};
use crate::seed::Rng;
use crate::theory::normal::{phi, tanh_cdf};

/// Half-width and resolution of the scan in [`tanh_cdf_approx_gap`].
pub const GAP_SCAN_LIMIT: f64 = 6.0;
pub const GAP_SCAN_STEP: f64 = 1e-4;

/// Largest `|Phi(z) - (tanh(pi z / (2 sqrt 3)) / 2 + 1/2)|` on the scan grid,
/// with the location where it occurs.
pub fn tanh_cdf_gap_argmax() -> (f64, f64) {
    let n = (2.0 * GAP_SCAN_LIMIT / GAP_SCAN_STEP).round() as i64;
    let mut best = (0.0, 0.0);
    for i in 0..=n {
        let z = -GAP_SCAN_LIMIT + i as f64 * GAP_SCAN_STEP;
        let gap = (phi(z) - tanh_cdf(z)).abs();
        if gap > best.0 {
            best = (gap, z);
        }
    }
    best
}

pub fn tanh_cdf_approx_gap() -> f64 {
    tanh_cdf_gap_argmax().0
}

/// Best achievable decode `r^2 = 1 - sigma^2 / (t var_x)` after `t` samples.
pub fn theoretical_r2(t: usize, sigma: f64, var_x: f64) -> f64 {
    1.0 - sigma * sigma / (t as f64 * var_x)
}

/// Empirical `r^2` of the sample-mean estimator over `n_trials` uniform
/// latents, pooled over dimensions: `1 - SSE / SST`.
pub fn monte_carlo_optimal_r2(sigma: f64, t: usize, d: usize, n_trials: usize, rng: &mut Rng) -> Result<f64> {
    if n_trials < 1000 {
        return Err(invalid("monte carlo r^2 needs at least 1000 trials"));
    }
    if t < 1 || d < 1 || !(sigma >= 0.0) {
        return Err(invalid("monte carlo r^2 needs t >= 1, D >= 1 and sigma >= 0"));
    }
    let n = n_trials as f64;
    let mut sse = 0.0;
    let mut sum = vec![0.0; d];
    let mut sum_sq = vec![0.0; d];
    for _ in 0..n_trials {
        for j in 0..d {
            let x: f64 = rng.random::<f64>() - 0.5;
            let mut acc = 0.0;
            for _ in 0..t {
                let e: f64 = rng.sample(StandardNormal);
                acc += x + sigma * e;
            }
            let err = acc / t as f64 - x;
            sse += err * err;
            sum[j] += x;
            sum_sq[j] += x * x;
        }
    }
    let sst: f64 = (0..d).map(|j| sum_sq[j] - sum[j] * sum[j] / n).sum();
    Ok(1.0 - sse / sst)
}
