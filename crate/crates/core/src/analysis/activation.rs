use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::analysis::states::{collect_states_at, CollectAt};
use crate::error::{invalid, Result};
use crate::train::TrainedNet;

/// Rate above which a unit counts as active.
pub const ACTIVE_THRESHOLD: f64 = 1e-3;
/// `|corr|` above which a unit counts as selective for a factor.
pub const SELECTIVITY_THRESHOLD: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActivationStats {
    pub grid_resolution: usize,
    /// Fraction of units above threshold, one entry per grid stimulus.
    pub fraction_active: Vec<f64>,
    pub mean_fraction_active: f64,
    pub mean_rate: f64,
    /// Pearson correlation of each unit with `x_1` and `x_2`; `None` for
    /// units that never vary.
    pub unit_correlations: Vec<Option<[f64; 2]>>,
    /// Units active on at least one stimulus.
    pub active_units: Vec<usize>,
    /// Fraction of active units selective for both factors.
    pub mixed_selectivity: f64,
}

fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa > 0.0 && sbb > 0.0 {
        Some(sab / (saa * sbb).sqrt())
    } else {
        None
    }
}

/// Final-step rates on a `res x res` grid of noiseless latents spanning
/// `[-0.5, 0.5]^2`.
pub fn activation_stats(net: &TrainedNet, f: usize, grid_resolution: usize) -> Result<ActivationStats> {
    if net.config.d != 2 {
        return Err(invalid("activation statistics need D = 2"));
    }
    if grid_resolution < 2 {
        return Err(invalid("grid resolution must be at least 2"));
    }
    let res = grid_resolution;
    let step = 1.0 / (res - 1) as f64;
    let latents = Array2::from_shape_fn((res * res, 2), |(k, j)| {
        let idx = if j == 0 { k / res } else { k % res };
        -0.5 + idx as f64 * step
    });
    let set = collect_states_at(net, f, 0.0, latents, CollectAt::FinalStep, 0)?;
    let rates = set.last();
    let n = rates.ncols();
    let fraction_active: Vec<f64> = rates
        .rows()
        .into_iter()
        .map(|r| r.iter().filter(|&&v| v > ACTIVE_THRESHOLD).count() as f64 / n as f64)
        .collect();
    let mean_fraction_active = fraction_active.iter().sum::<f64>() / fraction_active.len() as f64;
    let mean_rate = rates.mean().unwrap_or(0.0);
    let x1: Vec<f64> = set.latents.column(0).to_vec();
    let x2: Vec<f64> = set.latents.column(1).to_vec();
    let mut unit_correlations = Vec::with_capacity(n);
    let mut active_units = Vec::new();
    let mut mixed = 0usize;
    for (u, col) in rates.axis_iter(Axis(1)).enumerate() {
        let col = col.to_vec();
        let corr = match (pearson(&col, &x1), pearson(&col, &x2)) {
            (Some(a), Some(b)) => Some([a, b]),
            _ => None,
        };
        if col.iter().any(|&v| v > ACTIVE_THRESHOLD) {
            active_units.push(u);
            if let Some([a, b]) = corr {
                if a.abs() > SELECTIVITY_THRESHOLD && b.abs() > SELECTIVITY_THRESHOLD {
                    mixed += 1;
                }
            }
        }
        unit_correlations.push(corr);
    }
    let mixed_selectivity = if active_units.is_empty() {
        0.0
    } else {
        mixed as f64 / active_units.len() as f64
    };
    Ok(ActivationStats {
        grid_resolution,
        fraction_active,
        mean_fraction_active,
        mean_rate,
        unit_correlations,
        active_units,
        mixed_selectivity,
    })
}
