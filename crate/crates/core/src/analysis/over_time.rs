use serde::{Deserialize, Serialize};

use crate::analysis::decode::{decode_folds, percentiles, DecodeReport, Percentiles};
use crate::analysis::states::{collect_states, CollectAt};
use crate::error::Result;
use crate::seed::{self, stream};
use crate::tasks::latents::LATENT_VARIANCE;
use crate::theory::theoretical_r2;
use crate::train::TrainedNet;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimePoint {
    /// Number of observations seen (1-based step).
    pub t: usize,
    pub ood: Percentiles,
    pub id: Percentiles,
    pub theory: f64,
}

/// OOD decode `r^2` of the hidden state after each step, next to the
/// optimal value `1 - sigma^2 / (t var_x)`.
pub fn r2_over_time(net: &TrainedNet, n_trials: usize, repeats: usize, seed: u64) -> Result<Vec<TimePoint>> {
    let sigma = net.config.sigma;
    let samples = (0..repeats)
        .map(|rep| {
            collect_states(
                net,
                0,
                sigma,
                n_trials,
                CollectAt::AllSteps,
                seed::derive(seed, &[stream::DECODE, rep as u64]),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let n_steps = samples[0].states.dim().0;
    let mut out = Vec::with_capacity(n_steps);
    for t in 0..n_steps {
        let mut folds = Vec::new();
        for (rep, s) in samples.iter().enumerate() {
            folds.extend(decode_folds(s.at(t).view(), s.latents.view(), rep)?);
        }
        let report = DecodeReport::from_folds(folds);
        out.push(TimePoint {
            t: t + 1,
            ood: percentiles(&report.ood_values()),
            id: percentiles(&report.id_values()),
            theory: theoretical_r2(t + 1, sigma, LATENT_VARIANCE),
        });
    }
    Ok(out)
}
