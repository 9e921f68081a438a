use std::f64::consts::PI;

use ndarray::Array2;
use rand::Rng as _;
use rand_distr::StandardNormal;

use crate::error::{invalid, Result};
use crate::seed::Rng;
use crate::theory::normal::phi;

/// Half-width of the latent cube.
pub const LATENT_HALF_WIDTH: f64 = 0.5;
/// Variance of a single uniform latent component on [-0.5, 0.5].
pub const LATENT_VARIANCE: f64 = 1.0 / 12.0;

/// Gaussian correlation that yields Pearson correlation `rho` between the
/// uniform marginals of a Gaussian copula: `rho = (6/pi) asin(r/2)`.
pub fn copula_gaussian_correlation(rho: f64) -> f64 {
    2.0 * (PI * rho / 6.0).sin()
}

/// Draws `B x D` ground-truth latents, uniform on [-0.5, 0.5] per component.
/// For `D = 2` a positive `rho` correlates the two components through a
/// Gaussian copula while keeping the marginals uniform.
pub fn sample_latents(rng: &mut Rng, d: usize, rho: f64, batch: usize) -> Result<Array2<f64>> {
    if !(0.0..=1.0).contains(&rho) {
        return Err(invalid(format!("latent correlation {rho} outside [0, 1]")));
    }
    if d == 0 {
        return Err(invalid("latent dimension must be at least 1"));
    }
    if rho > 0.0 && d != 2 {
        return Err(invalid("correlated latents are only defined for D = 2"));
    }
    let mut out = Array2::zeros((batch, d));
    if rho == 0.0 {
        for v in out.iter_mut() {
            *v = rng.random::<f64>() - LATENT_HALF_WIDTH;
        }
        return Ok(out);
    }
    let r = copula_gaussian_correlation(rho).min(1.0);
    let tail = (1.0 - r * r).max(0.0).sqrt();
    for mut row in out.rows_mut() {
        let z1: f64 = rng.sample(StandardNormal);
        let e: f64 = rng.sample(StandardNormal);
        let z2 = r * z1 + tail * e;
        row[0] = phi(z1) - LATENT_HALF_WIDTH;
        row[1] = if rho == 1.0 { row[0] } else { phi(z2) - LATENT_HALF_WIDTH };
    }
    Ok(out)
}
