//! Disentanglement measures and state-space analyses of trained networks.

pub mod activation;
pub mod decode;
pub mod fixed_points;
pub mod over_time;
pub mod pca;
pub mod states;

pub use activation::{activation_stats, ActivationStats};
pub use decode::{
    crossval_ood, decode_folds, fit_decoder, fold_groups, quadrant_index, DecodeReport, LinearDecoder, Percentiles,
};
pub use fixed_points::{find_fixed_points, minimize_speed, speed, FixedPointConfig, FixedPointSet};
pub use over_time::{r2_over_time, TimePoint};
pub use pca::{pca, Pca};
pub use states::{collect_states, CollectAt, StateSet};

use crate::error::Result;
use crate::seed::{self, stream};
use crate::train::TrainedNet;

/// Trials per decoding repeat.
pub const DECODE_TRIALS: usize = 4000;

/// Held-out-orthant decoding of final-step states of family `f`, tested at
/// noise level `sigma`.
pub fn decode_network(net: &TrainedNet, f: usize, sigma: f64, repeats: usize, seed: u64) -> Result<DecodeReport> {
    crossval_ood(
        |rep| {
            let s = collect_states(
                net,
                f,
                sigma,
                DECODE_TRIALS,
                CollectAt::FinalStep,
                seed::derive(seed, &[stream::DECODE, rep as u64]),
            )?;
            Ok((s.last(), s.latents))
        },
        repeats,
    )
}

/// Fixed points of a fixed reaction time network with the fixation input
/// off and no evidence, seeded from trajectory states.
pub fn network_fixed_points(net: &TrainedNet, n_seeds: usize, cfg: &FixedPointConfig, seed: u64) -> Result<FixedPointSet> {
    use rand::Rng as _;
    let set = collect_states(net, 0, net.config.sigma, n_seeds, CollectAt::AllSteps, seed::derive(seed, &[stream::FIXED_POINTS]))?;
    let (t, m, _) = set.states.dim();
    let mut rng = seed::derived_rng(seed, &[stream::FIXED_POINTS, 1]);
    let mut seeds = ndarray::Array2::zeros((m, net.params.n_hidden()));
    for i in 0..m {
        let step = rng.random_range(t / 2..t);
        seeds.row_mut(i).assign(&set.states.slice(ndarray::s![step, i, ..]));
    }
    let input = ndarray::Array1::zeros(net.params.n_in());
    find_fixed_points(&net.params, seeds.view(), input.view(), cfg)
}
