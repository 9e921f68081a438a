use ndarray::{s, Array2, Array3, ArrayView2, Axis};
use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::seed::{self, Rng};
use crate::tasks::accumulator::accumulator_targets;
use crate::tasks::bank::{LinearBank, TaskBank};
use crate::tasks::encoder::EncoderParams;
use crate::tasks::latents::sample_latents;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrialMode {
    /// Report all classifications once the fixation input turns off.
    FixedRt,
    /// Report bounded accumulators at every step; no fixation input.
    FreeRt,
    /// Raw streams plus a one-hot rule; a single head reports the cued task.
    ContextDependent,
}

/// Length of the delay period in the delay variant (5 x 100 ms).
pub const DEFAULT_DELAY_STEPS: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialConfig {
    pub mode: TrialMode,
    /// Trial duration in steps, without the delay period.
    pub t_steps: usize,
    pub sigma: f64,
    /// Step length in ms, recorded as metadata.
    pub dt: f64,
    /// Zeroed-evidence steps inserted before the decision step.
    #[serde(default)]
    pub delay_steps: usize,
    /// Exclude fixation-period outputs from the loss instead of targeting 0.
    #[serde(default)]
    pub mask_fixation: bool,
    /// Pearson correlation of the two latent components (D = 2 only).
    #[serde(default)]
    pub rho: f64,
    /// Fixed rule for context-dependent trials; drawn per batch when `None`.
    #[serde(default)]
    pub rule: Option<usize>,
}

impl TrialConfig {
    pub fn fixed_rt(sigma: f64) -> Self {
        Self {
            mode: TrialMode::FixedRt,
            t_steps: 20,
            sigma,
            dt: 100.0,
            delay_steps: 0,
            mask_fixation: false,
            rho: 0.0,
            rule: None,
        }
    }

    pub fn total_steps(&self) -> usize {
        self.t_steps + self.delay_steps
    }

    /// Number of leading steps that carry evidence.
    pub fn stimulus_steps(&self) -> usize {
        if self.delay_steps > 0 {
            self.t_steps - 1
        } else {
            self.t_steps
        }
    }

    pub fn has_fixation(&self) -> bool {
        self.mode != TrialMode::FreeRt
    }

    pub fn validate(&self) -> Result<()> {
        if self.t_steps < 1 {
            return Err(invalid("trials need at least one step"));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(invalid(format!("noise level {} must be finite and >= 0", self.sigma)));
        }
        if self.mode == TrialMode::FreeRt && self.delay_steps > 0 {
            return Err(invalid("free reaction time trials have no delay period"));
        }
        if self.delay_steps > 0 && self.t_steps < 2 {
            return Err(invalid("a delay period needs at least two trial steps"));
        }
        if !(0.0..=1.0).contains(&self.rho) {
            return Err(invalid("rho must lie in [0, 1]"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchMeta {
    pub sigma: f64,
    pub t_steps: usize,
    pub dt: f64,
    pub seed: u64,
    pub mode: TrialMode,
}

/// One batch of trials. Arrays are batch-major: `B x T x ...`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialBatch {
    pub latents: Array2<f64>,
    pub observations: Array3<f64>,
    pub inputs: Array3<f64>,
    pub targets: Array3<f64>,
    pub loss_mask: Array3<f64>,
    pub meta: BatchMeta,
}

impl TrialBatch {
    pub fn batch_size(&self) -> usize {
        self.latents.nrows()
    }

    pub fn n_steps(&self) -> usize {
        self.observations.dim().1
    }

    /// Widens targets and mask to `total` outputs, placing this batch's
    /// outputs at `offset` and masking every other output.
    pub fn embed_outputs(&mut self, offset: usize, total: usize) {
        let (b, t, n) = self.targets.dim();
        assert!(offset + n <= total, "output slot out of range");
        let mut targets = Array3::zeros((b, t, total));
        let mut mask = Array3::zeros((b, t, total));
        targets.slice_mut(s![.., .., offset..offset + n]).assign(&self.targets);
        mask.slice_mut(s![.., .., offset..offset + n]).assign(&self.loss_mask);
        self.targets = targets;
        self.loss_mask = mask;
    }
}

/// `X(t) = x* + sigma N(0, I)`, i.i.d. per step and component; `B x T x D`.
pub fn gen_observations(latents: ArrayView2<f64>, sigma: f64, t_steps: usize, rng: &mut Rng) -> Result<Array3<f64>> {
    if !(sigma >= 0.0) {
        return Err(invalid(format!("noise level {sigma} must be >= 0")));
    }
    if t_steps < 1 {
        return Err(invalid("at least one observation step is required"));
    }
    let (b, d) = latents.dim();
    let mut obs = Array3::zeros((b, t_steps, d));
    for i in 0..b {
        for t in 0..t_steps {
            for j in 0..d {
                let noise: f64 = if sigma > 0.0 { rng.sample(StandardNormal) } else { 0.0 };
                obs[[i, t, j]] = latents[[i, j]] + sigma * noise;
            }
        }
    }
    Ok(obs)
}

/// The two context-dependent tasks: "which stream is larger" (boundary
/// `x_1 = x_2`) and "is the summed evidence positive" (boundary `x_1 = -x_2`).
pub fn context_bank() -> LinearBank {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    LinearBank::new(ndarray::array![[h, -h], [h, h]], ndarray::array![0.0, 0.0]).expect("valid bank")
}

/// Width of the network input for a given mode.
pub fn input_width(mode: TrialMode, encoder_dim: usize, latent_dim: usize, n_rules: usize) -> usize {
    match mode {
        TrialMode::FixedRt => encoder_dim + 1,
        TrialMode::FreeRt => encoder_dim,
        TrialMode::ContextDependent => latent_dim + 1 + n_rules,
    }
}

/// Builds a batch with a fresh generator seeded from `seed`.
pub fn build_batch(
    cfg: &TrialConfig,
    bank: &TaskBank,
    encoder: Option<&EncoderParams>,
    batch_size: usize,
    seed: u64,
) -> Result<TrialBatch> {
    cfg.validate()?;
    let mut rng = seed::rng(seed);
    let d = bank.dim();
    let latents = sample_latents(&mut rng, d, cfg.rho, batch_size)?;
    build_batch_from_latents(cfg, bank, encoder, latents, &mut rng, seed)
}

/// Same as [`build_batch`] with caller-provided latents.
pub fn build_batch_from_latents(
    cfg: &TrialConfig,
    bank: &TaskBank,
    encoder: Option<&EncoderParams>,
    latents: Array2<f64>,
    rng: &mut Rng,
    seed: u64,
) -> Result<TrialBatch> {
    cfg.validate()?;
    let (b, d) = latents.dim();
    if d != bank.dim() {
        return Err(invalid(format!("latents have D = {d}, bank has D = {}", bank.dim())));
    }
    let total = cfg.total_steps();
    let stim = cfg.stimulus_steps();
    let mut observations = gen_observations(latents.view(), cfg.sigma, total, rng)?;
    observations.slice_mut(s![.., stim.., ..]).fill(0.0);

    let decision = total - 1;
    let meta = BatchMeta {
        sigma: cfg.sigma,
        t_steps: total,
        dt: cfg.dt,
        seed,
        mode: cfg.mode,
    };

    match cfg.mode {
        TrialMode::FixedRt => {
            let enc = encoder.ok_or_else(|| invalid("fixed reaction time trials need an encoder"))?;
            let feats = encode_stimulus(enc, &observations, stim);
            let f = feats.dim().2;
            let mut inputs = Array3::zeros((b, total, f + 1));
            inputs.slice_mut(s![.., .., ..f]).assign(&feats);
            inputs.slice_mut(s![.., ..decision, f]).fill(1.0);
            let labels = bank.labels(latents.view())?;
            let n = labels.ncols();
            let mut targets = Array3::zeros((b, total, n));
            targets.slice_mut(s![.., decision, ..]).assign(&labels);
            let mut loss_mask = Array3::ones((b, total, n));
            if cfg.mask_fixation {
                loss_mask.slice_mut(s![.., ..decision, ..]).fill(0.0);
            }
            Ok(TrialBatch {
                latents,
                observations,
                inputs,
                targets,
                loss_mask,
                meta,
            })
        }
        TrialMode::FreeRt => {
            let enc = encoder.ok_or_else(|| invalid("free reaction time trials need an encoder"))?;
            let linear = bank
                .as_linear()
                .ok_or_else(|| invalid("free reaction time trials need a linear bank"))?;
            let inputs = encode_stimulus(enc, &observations, stim);
            let targets = accumulator_targets(observations.view(), linear)?;
            let loss_mask = Array3::ones(targets.raw_dim());
            Ok(TrialBatch {
                latents,
                observations,
                inputs,
                targets,
                loss_mask,
                meta,
            })
        }
        TrialMode::ContextDependent => {
            let linear = bank
                .as_linear()
                .ok_or_else(|| invalid("context-dependent trials need a linear bank"))?;
            let n_rules = linear.n_tasks();
            let rule = match cfg.rule {
                Some(r) if r < n_rules => r,
                Some(r) => return Err(invalid(format!("rule {r} out of range for {n_rules} tasks"))),
                None => rng.random_range(0..n_rules),
            };
            let mut inputs = Array3::zeros((b, total, d + 1 + n_rules));
            inputs.slice_mut(s![.., .., ..d]).assign(&observations);
            inputs.slice_mut(s![.., ..decision, d]).fill(1.0);
            inputs.slice_mut(s![.., .., d + 1 + rule]).fill(1.0);
            let labels = bank.labels(latents.view())?;
            let mut targets = Array3::zeros((b, total, 1));
            targets
                .slice_mut(s![.., decision, 0])
                .assign(&labels.column(rule));
            let mut loss_mask = Array3::ones((b, total, 1));
            if cfg.mask_fixation {
                loss_mask.slice_mut(s![.., ..decision, ..]).fill(0.0);
            }
            Ok(TrialBatch {
                latents,
                observations,
                inputs,
                targets,
                loss_mask,
                meta,
            })
        }
    }
}

/// Encodes every step, then zeroes the features of steps without evidence.
fn encode_stimulus(enc: &EncoderParams, observations: &Array3<f64>, stim: usize) -> Array3<f64> {
    let (b, t, d) = observations.dim();
    let flat = observations
        .view()
        .into_shape_with_order((b * t, d))
        .expect("contiguous observations");
    let feats = enc.encode_rows(flat);
    let f = feats.ncols();
    let mut feats = feats.into_shape_with_order((b, t, f)).expect("reshape features");
    if stim < t {
        feats.slice_mut(s![.., stim.., ..]).fill(0.0);
    }
    feats
}

/// Which rule a context-dependent batch cued (index of the hot channel).
pub fn cued_rule(batch: &TrialBatch, latent_dim: usize) -> Option<usize> {
    let row = batch.inputs.index_axis(Axis(0), 0);
    let first = row.index_axis(Axis(0), 0);
    first
        .iter()
        .skip(latent_dim + 1)
        .position(|&v| v == 1.0)
}
