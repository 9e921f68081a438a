use ndarray::{s, Array2, Array3, Axis};
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::net::forward_batch;
use crate::seed;
use crate::tasks::batch::build_batch_from_latents;
use crate::train::TrainedNet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CollectAt {
    FinalStep,
    AllSteps,
}

/// Hidden states paired with the latents that generated them.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSet {
    /// `n_times x M x N`; a single time slice for [`CollectAt::FinalStep`].
    pub states: Array3<f64>,
    /// `M x D`
    pub latents: Array2<f64>,
}

impl StateSet {
    pub fn len(&self) -> usize {
        self.latents.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// States of the last collected time slice, `M x N`.
    pub fn last(&self) -> Array2<f64> {
        let t = self.states.dim().0;
        self.states.index_axis(Axis(0), t - 1).to_owned()
    }

    pub fn at(&self, t: usize) -> Array2<f64> {
        self.states.index_axis(Axis(0), t).to_owned()
    }
}

/// Runs `n_trials` fresh trials of family `f` at noise `sigma` and returns
/// hidden states at the final step (after any delay) or at every step.
pub fn collect_states(net: &TrainedNet, f: usize, sigma: f64, n_trials: usize, at: CollectAt, seed: u64) -> Result<StateSet> {
    let n = net.params.n_hidden();
    let d = net.config.d;
    if n_trials == 0 {
        let t = match at {
            CollectAt::FinalStep => 1,
            CollectAt::AllSteps => net.config.trial_config(sigma).total_steps(),
        };
        return Ok(StateSet {
            states: Array3::zeros((t, 0, n)),
            latents: Array2::zeros((0, d)),
        });
    }
    let batch = net.batch(f, sigma, n_trials, seed)?;
    Ok(states_of_batch(net, &batch.inputs, batch.latents, at)?)
}

/// Same as [`collect_states`] for caller-chosen latents.
pub fn collect_states_at(net: &TrainedNet, f: usize, sigma: f64, latents: Array2<f64>, at: CollectAt, seed: u64) -> Result<StateSet> {
    let tc = net.config.trial_config(sigma);
    let mut rng = seed::rng(seed);
    let batch = build_batch_from_latents(&tc, &net.setup.banks[f], net.setup.encoder.as_ref(), latents, &mut rng, seed)?;
    states_of_batch(net, &batch.inputs, batch.latents, at)
}

fn states_of_batch(net: &TrainedNet, inputs: &Array3<f64>, latents: Array2<f64>, at: CollectAt) -> Result<StateSet> {
    let traj = forward_batch(&net.params, inputs.view())?;
    let hidden = traj.hidden();
    let t = hidden.dim().0;
    let states = match at {
        CollectAt::FinalStep => hidden.slice(s![t - 1..t, .., ..]).to_owned(),
        CollectAt::AllSteps => hidden.to_owned(),
    };
    Ok(StateSet { states, latents })
}
