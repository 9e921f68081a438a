//! Numerical checks of the closed-form results, runnable without training.
//! The inverse normal CDF is injectable so a corrupted implementation can
//! be shown to fail loudly.

use std::time::Instant;

use ndarray::{Array1, Array2};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::seed;
use crate::tasks::latents::LATENT_VARIANCE;
use crate::tasks::{make_linear_taskbank, BankMode, LinearBank};
use crate::theory::normal::phi;
use crate::theory::posterior::side_prob;
use crate::theory::r2::tanh_cdf_gap_argmax;
use crate::theory::{monte_carlo_optimal_r2, phi_inv, theoretical_r2, Trilaterator};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    /// The measured quantity the threshold applies to.
    pub value: f64,
    pub threshold: f64,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoryReport {
    pub passed: bool,
    pub checks: Vec<Check>,
    /// Largest gap between `Phi` and its tanh approximation on `[-6, 6]`.
    pub tanh_gap: f64,
    pub tanh_gap_at: f64,
    pub runtime_s: f64,
}

fn check(name: &str, value: f64, threshold: f64, detail: String) -> Check {
    Check {
        name: name.into(),
        passed: value.is_finite() && value < threshold,
        value,
        threshold,
        detail,
    }
}

pub fn verify_theory() -> Result<TheoryReport> {
    verify_theory_with(&|p| phi_inv(p).unwrap_or(f64::NAN))
}

/// Runs every check with `inv` standing in for the inverse normal CDF.
pub fn verify_theory_with(inv: &dyn Fn(f64) -> f64) -> Result<TheoryReport> {
    let start = Instant::now();
    let mut checks = Vec::new();

    // Phi(inv(p)) = p, relative to the smaller tail mass.
    let mut worst: f64 = 0.0;
    let mut probs: Vec<f64> = (1..1000).map(|i| i as f64 / 1000.0).collect();
    probs.extend((1..=300).map(|k| 10f64.powf(-(k as f64) / 20.0)));
    probs.extend((1..=180).map(|k| 1.0 - 10f64.powf(-(k as f64) / 20.0 - 1.0)));
    for &p in &probs {
        let err = (phi(inv(p)) - p).abs() / p.min(1.0 - p);
        worst = worst.max(if err.is_nan() { f64::INFINITY } else { err });
    }
    checks.push(check(
        "phi_inv_round_trip",
        worst,
        1e-9,
        format!("max relative error of Phi(Phi^-1(p)) over {} probabilities", probs.len()),
    ));

    // Distance -> probability -> distance.
    let mut rng = seed::rng(0x7e0);
    let mut worst: f64 = 0.0;
    for _ in 0..2000 {
        let k: f64 = rng.random_range(-1.0..1.0);
        let t: usize = rng.random_range(1..=50);
        let sigma: f64 = rng.random_range(0.05..1.0);
        let p = side_prob(k, t, sigma);
        if p <= crate::theory::PROB_CLAMP || p >= 1.0 - crate::theory::PROB_CLAMP {
            continue;
        }
        let back = sigma / (t as f64).sqrt() * inv(p);
        worst = worst.max(if back.is_nan() { f64::INFINITY } else { (back - k).abs() });
    }
    checks.push(check(
        "probability_distance_round_trip",
        worst,
        1e-8,
        "max |k - (sigma/sqrt t) Phi^-1(Phi(k sqrt t / sigma))|".into(),
    ));

    // Trilateration recovers the posterior mean from exact probabilities.
    let mut worst: f64 = 0.0;
    for _ in 0..300 {
        let d: usize = rng.random_range(2..=8);
        let n: usize = rng.random_range(d..=3 * d);
        let t: usize = rng.random_range(1..=50);
        let sigma: f64 = rng.random_range(0.05..1.0);
        let scale = sigma / (t as f64).sqrt();
        let mu = Array1::from_shape_fn(d, |_| rng.random_range(-0.5..0.5));
        // Offsets put every standardized distance in [-5, 5], away from
        // saturation of Phi.
        let normals = make_linear_taskbank(d, n, BankMode::RandomHyperplanes, &mut rng)?
            .normals()
            .to_owned();
        let z = Array1::from_shape_fn(n, |_| rng.random_range(-5.0..5.0));
        let offsets = normals.dot(&mu) - z * scale;
        let bank = LinearBank::new(normals, offsets)?;
        let tri = Trilaterator::new(&bank)?;
        let k = bank.normals().dot(&mu) - bank.offsets();
        let dist = k.mapv(|k| scale * inv(phi(k / scale)));
        let est = tri.solve_distances(&dist);
        let err = (&est - &mu).iter().fold(0.0f64, |m, e| m.max(e.abs()));
        worst = worst.max(if err.is_nan() { f64::INFINITY } else { err });
    }
    checks.push(check(
        "trilateration_exact",
        worst,
        1e-8,
        "max |trilaterate(class_prob(mu)) - mu| over 300 random banks".into(),
    ));

    // Monte Carlo optimal decoding against 1 - sigma^2 / (t var_x).
    let mut worst: f64 = 0.0;
    let mut detail = Vec::new();
    for t in [1, 5, 20] {
        let mc = monte_carlo_optimal_r2(0.2, t, 2, 100_000, &mut seed::derived_rng(0x7e1, &[t as u64]))?;
        let th = theoretical_r2(t, 0.2, LATENT_VARIANCE);
        worst = worst.max((mc - th).abs());
        detail.push(format!("t={t}: mc {mc:.4} closed form {th:.4}"));
    }
    checks.push(check("monte_carlo_r2", worst, 0.005, detail.join("; ")));

    // The scanned tanh gap against a local refinement of its maximum.
    let (gap, at) = tanh_cdf_gap_argmax();
    let refined = refine_gap(at.abs());
    checks.push(check(
        "tanh_gap_scan_converged",
        (refined - gap).abs(),
        1e-6,
        format!("scan {gap:.7} at |z| = {:.4}, refined {refined:.7}", at.abs()),
    ));

    // tanh decoding agrees with exact trilateration when sigma / sqrt(t) is
    // moderate.
    let bank = make_linear_taskbank(2, 24, BankMode::UniformAngles2d, &mut seed::rng(0))?;
    let worst = tanh_vs_exact(&bank, 0.6, 4, inv)?;
    checks.push(check(
        "tanh_decode_agreement",
        worst,
        0.05,
        "max per-component |tanh_decode - trilaterate| on a 21x21 latent grid, sigma 0.6, t 4".into(),
    ));

    Ok(TheoryReport {
        passed: checks.iter().all(|c| c.passed),
        checks,
        tanh_gap: gap,
        tanh_gap_at: at.abs(),
        runtime_s: start.elapsed().as_secs_f64(),
    })
}

/// Golden-section maximization of the tanh gap around `z0`.
fn refine_gap(z0: f64) -> f64 {
    let f = |z: f64| (phi(z) - crate::theory::normal::tanh_cdf(z)).abs();
    let (mut a, mut b) = (z0 - 0.01, z0 + 0.01);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..100 {
        let c = b - g * (b - a);
        let d = a + g * (b - a);
        if f(c) > f(d) {
            b = d;
        } else {
            a = c;
        }
    }
    f((a + b) / 2.0)
}

/// Worst per-component disagreement of the two decoders on exact readouts
/// over a grid of the latent square.
pub fn tanh_vs_exact(bank: &LinearBank, sigma: f64, t: usize, inv: &dyn Fn(f64) -> f64) -> Result<f64> {
    let tri = Trilaterator::new(bank)?;
    let scale = sigma / (t as f64).sqrt();
    let grid = Array2::from_shape_fn((21 * 21, 2), |(i, j)| {
        let k = if j == 0 { i / 21 } else { i % 21 };
        -0.5 + k as f64 / 20.0
    });
    let mut worst: f64 = 0.0;
    for mu in grid.rows() {
        let k = bank.normals().dot(&mu) - bank.offsets();
        let y = k.mapv(|k| phi(k / scale));
        let exact = tri.solve_distances(&y.mapv(|y| scale * inv(y)));
        let z = y.mapv(|y| (2.0 * y - 1.0).atanh());
        let approx = tri.tanh_decode(&z, t, sigma)?;
        let err = (&approx - &exact).iter().fold(0.0f64, |m, e| m.max(e.abs()));
        worst = worst.max(if err.is_nan() { f64::INFINITY } else { err });
    }
    Ok(worst)
}
