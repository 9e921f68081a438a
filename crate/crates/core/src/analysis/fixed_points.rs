//! Slow-point search: minimize `q(z) = |F(z) - z|^2 / 2` with Adam, where
//! `F` is one network step under a constant input.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis, Zip};
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::net::LeakyRnnParams;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixedPointConfig {
    pub lr: f64,
    pub max_iter: usize,
    pub tol: f64,
    pub dedup_radius: f64,
}

impl Default for FixedPointConfig {
    fn default() -> Self {
        Self {
            lr: 0.01,
            max_iter: 5000,
            tol: 1e-8,
            dedup_radius: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedPointSet {
    /// `M x N`
    pub points: Array2<f64>,
    pub speeds: Vec<f64>,
    pub n_seeds: usize,
    pub n_converged: usize,
    pub config: FixedPointConfig,
    /// The constant input held during the search.
    pub input: Array1<f64>,
}

impl FixedPointSet {
    pub fn len(&self) -> usize {
        self.speeds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.speeds.is_empty()
    }
}

fn step_rows(p: &LeakyRnnParams, z: ArrayView2<f64>, drive0: &Array1<f64>) -> (Array2<f64>, Array2<f64>) {
    let a = z.dot(&p.w_rec.t()) + drive0;
    let alpha = p.alpha();
    let mut f = Array2::zeros(z.raw_dim());
    Zip::from(&mut f)
        .and(&z)
        .and(&a)
        .for_each(|f, &z, &a| *f = (1.0 - alpha) * z + alpha * a.max(0.0));
    (f, a)
}

/// `q(z)` for one state under constant input `x`.
pub fn speed(p: &LeakyRnnParams, z: ArrayView1<f64>, x: ArrayView1<f64>) -> f64 {
    let drive0 = p.w_in.dot(&x) + &p.b;
    let zr = z.insert_axis(Axis(0));
    let (f, _) = step_rows(p, zr, &drive0);
    0.5 * (&f - &zr).iter().map(|r| r * r).sum::<f64>()
}

/// Runs Adam on `q` from every row of `seeds`, freezing a row once its
/// speed drops below `tol`. Returns the final states and their speeds.
pub fn minimize_speed(
    p: &LeakyRnnParams,
    seeds: ArrayView2<f64>,
    input: ArrayView1<f64>,
    cfg: &FixedPointConfig,
) -> (Array2<f64>, Vec<f64>) {
    let (m, n) = seeds.dim();
    let alpha = p.alpha();
    let drive0 = p.w_in.dot(&input) + &p.b;
    let mut z = seeds.to_owned();
    let mut mom = Array2::<f64>::zeros((m, n));
    let mut vel = Array2::<f64>::zeros((m, n));
    let mut done = vec![false; m];
    let (b1, b2, eps) = (0.9, 0.999, 1e-8);
    let mut q = vec![f64::INFINITY; m];
    for it in 1..=cfg.max_iter {
        let (f, a) = step_rows(p, z.view(), &drive0);
        let r = &f - &z;
        for i in 0..m {
            q[i] = 0.5 * r.row(i).iter().map(|v| v * v).sum::<f64>();
            if q[i] < cfg.tol {
                done[i] = true;
            }
        }
        if done.iter().all(|&d| d) {
            break;
        }
        // grad q = alpha (W_rec^T ([a > 0] r) - r)
        let mut gated = r.clone();
        Zip::from(&mut gated).and(&a).for_each(|g, &a| {
            if a <= 0.0 {
                *g = 0.0;
            }
        });
        let grad = (gated.dot(&p.w_rec) - &r) * alpha;
        let c1 = 1.0 - f64::powi(b1, it as i32);
        let c2 = 1.0 - f64::powi(b2, it as i32);
        for i in 0..m {
            if done[i] {
                continue;
            }
            for j in 0..n {
                let g = grad[[i, j]];
                mom[[i, j]] = b1 * mom[[i, j]] + (1.0 - b1) * g;
                vel[[i, j]] = b2 * vel[[i, j]] + (1.0 - b2) * g * g;
                z[[i, j]] -= cfg.lr * (mom[[i, j]] / c1) / ((vel[[i, j]] / c2).sqrt() + eps);
            }
        }
    }
    (z, q)
}

/// Runs the search from every row of `seeds`, keeps states with
/// `q < tol` and removes duplicates closer than the dedup radius, keeping
/// the slower point.
pub fn find_fixed_points(
    p: &LeakyRnnParams,
    seeds: ArrayView2<f64>,
    input: ArrayView1<f64>,
    cfg: &FixedPointConfig,
) -> Result<FixedPointSet> {
    let m = seeds.nrows();
    let (z, q) = minimize_speed(p, seeds, input, cfg);
    let mut order: Vec<usize> = (0..m).filter(|&i| q[i] < cfg.tol && q[i].is_finite()).collect();
    let n_converged = order.len();
    order.sort_by(|&i, &j| q[i].total_cmp(&q[j]));
    let mut kept: Vec<usize> = Vec::new();
    for &i in &order {
        let far = kept.iter().all(|&k| {
            let d2: f64 = z.row(i).iter().zip(z.row(k)).map(|(a, b)| (a - b) * (a - b)).sum();
            d2.sqrt() > cfg.dedup_radius
        });
        if far {
            kept.push(i);
        }
    }
    let points = z.select(Axis(0), &kept);
    let speeds = (0..kept.len()).map(|r| speed(p, points.row(r), input)).collect();
    Ok(FixedPointSet {
        points,
        speeds,
        n_seeds: m,
        n_converged,
        config: *cfg,
        input: input.to_owned(),
    })
}
