//! Bounded, quantized evidence accumulators used as free-reaction-time targets.

use ndarray::{Array3, ArrayView3};

use crate::error::{invalid, Result};
use crate::tasks::bank::LinearBank;

/// Decision bound of the accumulators.
pub const ACCUMULATOR_BOUND: f64 = 5.0;

/// Per-step increment weights for each boundary of a two-dimensional bank.
///
/// A boundary `x_1 = alpha x_2` accumulates `X_1 - alpha X_2`. Steep
/// boundaries (`|c_2| > |c_1|`) use the mirrored form `X_2 - beta X_1`, so
/// every increment is `c^T X / max(|c_1|, |c_2|)` with the sign of the
/// label convention.
pub fn increment_weights(bank: &LinearBank) -> Result<Vec<[f64; 2]>> {
    if bank.dim() != 2 {
        return Err(invalid("accumulator targets require D = 2"));
    }
    if bank.offsets().iter().any(|&b| b != 0.0) {
        return Err(invalid("accumulator targets require boundaries through the origin"));
    }
    Ok(bank
        .normals()
        .rows()
        .into_iter()
        .map(|c| {
            let scale = c[0].abs().max(c[1].abs());
            [c[0] / scale, c[1] / scale]
        })
        .collect())
}

/// Runs the accumulators over `observations` (`B x T x 2`) and returns
/// `B x T x N_task` integer-valued targets in [-5, 5]. A trial/task is frozen
/// once its quantized value reaches the bound.
pub fn accumulator_targets(observations: ArrayView3<f64>, bank: &LinearBank) -> Result<Array3<f64>> {
    let weights = increment_weights(bank)?;
    let (b, t, d) = observations.dim();
    if d != 2 {
        return Err(invalid("observations must have D = 2"));
    }
    let n = weights.len();
    let mut out = Array3::zeros((b, t, n));
    for trial in 0..b {
        for (task, w) in weights.iter().enumerate() {
            let mut raw = 0.0;
            let mut frozen: Option<f64> = None;
            for step in 0..t {
                let value = match frozen {
                    Some(v) => v,
                    None => {
                        raw += w[0] * observations[[trial, step, 0]] + w[1] * observations[[trial, step, 1]];
                        let q = raw.round().clamp(-ACCUMULATOR_BOUND, ACCUMULATOR_BOUND);
                        if q.abs() >= ACCUMULATOR_BOUND {
                            frozen = Some(q);
                        }
                        q
                    }
                };
                out[[trial, step, task]] = value;
            }
        }
    }
    Ok(out)
}
