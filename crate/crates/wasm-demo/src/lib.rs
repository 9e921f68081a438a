//! Browser demo of the analytic optimal classifier: trilateration from
//! class probabilities, bounded evidence accumulators, and the optimal
//! decoding `r^2` over time. Each export returns a JSON string.

use ndarray::{Array1, Array2, Axis};
use serde::Serialize;
use wasm_bindgen::prelude::*;

use evidence::seed;
use evidence::tasks::{accumulator_targets, gen_observations, make_linear_taskbank, BankMode};
use evidence::tasks::latents::LATENT_VARIANCE;
use evidence::theory::{
    class_prob, monte_carlo_optimal_r2, running_mean, theoretical_r2, PosteriorEstimate, Trilaterator,
};

#[derive(Debug, Serialize)]
pub struct Boundary {
    pub normal: [f64; 2],
    pub offset: f64,
    pub prob: f64,
}

#[derive(Debug, Serialize)]
pub struct TrilaterationView {
    pub boundaries: Vec<Boundary>,
    pub exact: [f64; 2],
    pub tanh: [f64; 2],
    /// Posterior standard deviation per coordinate.
    pub posterior_sd: f64,
}

fn pair(a: &Array1<f64>) -> [f64; 2] {
    [a[0], a[1]]
}

/// Class probabilities of `n_tasks` evenly rotated boundaries for a
/// posterior mean `(x1, x2)` after `t` samples at noise `sigma`, and the
/// position recovered from them exactly and through the tanh shortcut.
pub fn trilaterate_view(x1: f64, x2: f64, sigma: f64, t: usize, n_tasks: usize) -> Result<TrilaterationView, String> {
    let bank = make_linear_taskbank(2, n_tasks.max(2), BankMode::UniformAngles2d, &mut seed::rng(0))
        .map_err(|e| e.to_string())?;
    let est = PosteriorEstimate::new(Array1::from(vec![x1, x2]), t.max(1), sigma).map_err(|e| e.to_string())?;
    let probs = class_prob(&est, &bank).map_err(|e| e.to_string())?;
    let tri = Trilaterator::new(&bank).map_err(|e| e.to_string())?;
    let exact = tri.trilaterate(&probs, est.t, sigma).map_err(|e| e.to_string())?;
    let z = probs.mapv(|y| (2.0 * y - 1.0).atanh());
    let tanh = tri.tanh_decode(&z, est.t, sigma).map_err(|e| e.to_string())?;
    let boundaries = bank
        .normals()
        .rows()
        .into_iter()
        .zip(bank.offsets())
        .zip(&probs)
        .map(|((c, &b), &p)| Boundary {
            normal: [c[0], c[1]],
            offset: b,
            prob: p,
        })
        .collect();
    Ok(TrilaterationView {
        boundaries,
        exact: pair(&exact),
        tanh: pair(&tanh),
        posterior_sd: est.variance().sqrt(),
    })
}

#[derive(Debug, Serialize)]
pub struct TrialView {
    /// `T x 2` noisy observations.
    pub observations: Vec<[f64; 2]>,
    /// Running mean after each step.
    pub running_mean: Vec<[f64; 2]>,
    /// Bounded accumulator of each boundary over time (`n_tasks x T`).
    pub accumulators: Vec<Vec<f64>>,
    pub normals: Vec<[f64; 2]>,
}

/// One noisy trial around `(x1, x2)` with the bounded accumulators of a
/// few boundaries.
pub fn trial_view(x1: f64, x2: f64, sigma: f64, t: usize, n_tasks: usize, trial_seed: u64) -> Result<TrialView, String> {
    let t = t.max(1);
    let bank = make_linear_taskbank(2, n_tasks.max(2), BankMode::UniformAngles2d, &mut seed::rng(0))
        .map_err(|e| e.to_string())?;
    let latents = Array2::from_shape_vec((1, 2), vec![x1, x2]).map_err(|e| e.to_string())?;
    let mut rng = seed::rng(trial_seed);
    let obs = gen_observations(latents.view(), sigma, t, &mut rng).map_err(|e| e.to_string())?;
    let acc = accumulator_targets(obs.view(), &bank).map_err(|e| e.to_string())?;
    let trial = obs.index_axis(Axis(0), 0);
    let observations = trial.rows().into_iter().map(|r| [r[0], r[1]]).collect();
    let running = (1..=t)
        .map(|k| {
            running_mean(trial.view(), k, sigma.max(1e-12))
                .map(|e| pair(&e.mu))
                .map_err(|e| e.to_string())
        })
        .collect::<Result<Vec<_>, _>>()?;
    let accumulators = (0..bank.n_tasks()).map(|j| acc.slice(ndarray::s![0, .., j]).to_vec()).collect();
    let normals = bank.normals().rows().into_iter().map(|c| [c[0], c[1]]).collect();
    Ok(TrialView {
        observations,
        running_mean: running,
        accumulators,
        normals,
    })
}

#[derive(Debug, Serialize)]
pub struct R2Point {
    pub t: usize,
    pub theory: f64,
    pub monte_carlo: f64,
}

/// `1 - sigma^2 / (t var_x)` against brute-force decoding for `t = 1..=t_max`.
pub fn r2_curve(sigma: f64, t_max: usize, n_trials: usize) -> Result<Vec<R2Point>, String> {
    (1..=t_max.max(1))
        .map(|t| {
            let mut rng = seed::derived_rng(1, &[t as u64]);
            Ok(R2Point {
                t,
                theory: theoretical_r2(t, sigma, LATENT_VARIANCE),
                monte_carlo: monte_carlo_optimal_r2(sigma, t, 2, n_trials.max(1000), &mut rng).map_err(|e| e.to_string())?,
            })
        })
        .collect()
}

fn to_json<T: Serialize>(r: Result<T, String>) -> Result<String, JsValue> {
    r.and_then(|v| serde_json::to_string(&v).map_err(|e| e.to_string()))
        .map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn trilaterate(x1: f64, x2: f64, sigma: f64, t: usize, n_tasks: usize) -> Result<String, JsValue> {
    to_json(trilaterate_view(x1, x2, sigma, t, n_tasks))
}

#[wasm_bindgen]
pub fn trial(x1: f64, x2: f64, sigma: f64, t: usize, n_tasks: usize, trial_seed: u32) -> Result<String, JsValue> {
    to_json(trial_view(x1, x2, sigma, t, n_tasks, trial_seed as u64))
}

#[wasm_bindgen]
pub fn r2(sigma: f64, t_max: usize, n_trials: usize) -> Result<String, JsValue> {
    to_json(r2_curve(sigma, t_max, n_trials))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_decode_recovers_the_mean() {
        let v = trilaterate_view(0.2, -0.3, 0.2, 10, 24).unwrap();
        assert!((v.exact[0] - 0.2).abs() < 1e-9 && (v.exact[1] + 0.3).abs() < 1e-9);
        assert_eq!(v.boundaries.len(), 24);
        assert!(v.boundaries.iter().all(|b| b.prob > 0.0 && b.prob < 1.0));
    }

    #[test]
    fn accumulators_stay_bounded() {
        let v = trial_view(0.4, 0.4, 0.5, 40, 6, 3).unwrap();
        assert_eq!(v.observations.len(), 40);
        assert_eq!(v.accumulators.len(), 6);
        assert!(v.accumulators.iter().flatten().all(|a| a.abs() <= 5.0));
    }

    #[test]
    fn r2_curve_tracks_theory() {
        let c = r2_curve(0.2, 5, 20_000).unwrap();
        assert_eq!(c.len(), 5);
        for p in &c {
            assert!((p.theory - p.monte_carlo).abs() < 0.02, "{p:?}");
        }
    }
}
