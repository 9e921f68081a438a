//! Standard normal CDF and its inverse.
//!
//! `phi` goes through the complementary error function (musl's rational
//! approximations via `libm`), which keeps full relative precision in the
//! lower tail. `phi_inv` starts from Acklam's rational approximation
//! (relative error below 1.2e-9) and applies one Newton step on `phi`.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use crate::error::{Error, Result};

/// Standard normal density.
pub fn pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * PI).sqrt()
}

/// Standard normal CDF.
pub fn phi(z: f64) -> f64 {
    0.5 * libm::erfc(-z * FRAC_1_SQRT_2)
}

/// Upper tail `1 - phi(z)` without cancellation.
pub fn phi_upper(z: f64) -> f64 {
    0.5 * libm::erfc(z * FRAC_1_SQRT_2)
}

const A: [f64; 6] = [
    -3.969_683_028_665_376e1,
    2.209_460_984_245_205e2,
    -2.759_285_104_469_687e2,
    1.383_577_518_672_69e2,
    -3.066_479_806_614_716e1,
    2.506_628_277_459_239,
];
const B: [f64; 5] = [
    -5.447_609_879_822_406e1,
    1.615_858_368_580_409e2,
    -1.556_989_798_598_866e2,
    6.680_131_188_771_972e1,
    -1.328_068_155_288_572e1,
];
const C: [f64; 6] = [
    -7.784_894_002_430_293e-3,
    -3.223_964_580_411_365e-1,
    -2.400_758_277_161_838,
    -2.549_732_539_343_734,
    4.374_664_141_464_968,
    2.938_163_982_698_783,
];
const D: [f64; 4] = [
    7.784_695_709_041_462e-3,
    3.224_671_290_700_398e-1,
    2.445_134_137_142_996,
    3.754_408_661_907_416,
];
const P_LOW: f64 = 0.02425;

fn acklam_lower_half(p: f64) -> f64 {
    if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    }
}

/// Inverse for `p <= 0.5`, where `phi` is evaluated without cancellation.
fn inv_lower_half(p: f64) -> f64 {
    let x = acklam_lower_half(p);
    let density = pdf(x);
    if density > 0.0 {
        x - (phi(x) - p) / density
    } else {
        x
    }
}

/// Inverse standard normal CDF on the open interval (0, 1).
pub fn phi_inv(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::ProbabilityOutOfRange(p));
    }
    Ok(if p <= 0.5 {
        inv_lower_half(p)
    } else {
        // 1 - p is exact for p in [0.5, 1).
        -inv_lower_half(1.0 - p)
    })
}

/// The logistic-type approximation `0.5 * tanh(pi z / (2 sqrt 3)) + 0.5`.
pub fn tanh_cdf(z: f64) -> f64 {
    0.5 * (TANH_SLOPE * z).tanh() + 0.5
}

/// `pi / (2 sqrt 3)`, the slope matching the unit-variance logistic.
pub const TANH_SLOPE: f64 = 0.906_899_682_117_108_9;
