use std::path::Path;
use std::time::Instant;

use ndarray::{s, Axis};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::net::checkpoint::{self, CheckpointHeader};
use crate::net::dynamics::{backward_time_major, forward_batch, to_time_major};
use crate::net::{AdamState, LeakyRnnParams};
use crate::seed::{self, stream};
use crate::tasks::batch::{build_batch, TrialBatch, TrialMode};
use crate::tasks::TaskBank;
use crate::train::config::{BankSpec, TrainConfig, TrainSetup};

/// A trained network together with the config that produced it.
#[derive(Debug, Clone)]
pub struct TrainedNet {
    pub config: TrainConfig,
    pub setup: TrainSetup,
    pub params: LeakyRnnParams,
}

impl TrainedNet {
    pub fn new(config: TrainConfig, params: LeakyRnnParams) -> Result<Self> {
        let setup = TrainSetup::new(&config)?;
        if setup.net_shape(&config) != params.shape() {
            return Err(invalid("parameters do not match the config's network shape"));
        }
        Ok(Self { config, setup, params })
    }

    /// One batch of family `f` at noise level `sigma`, outputs embedded in
    /// the full head.
    pub fn batch(&self, f: usize, sigma: f64, batch_size: usize, seed: u64) -> Result<TrialBatch> {
        self.batch_with_rule(f, sigma, batch_size, seed, None)
    }

    pub fn batch_with_rule(
        &self,
        f: usize,
        sigma: f64,
        batch_size: usize,
        seed: u64,
        rule: Option<usize>,
    ) -> Result<TrialBatch> {
        let mut tc = self.config.trial_config(sigma);
        tc.rule = rule;
        let mut batch = build_batch(&tc, &self.setup.banks[f], self.setup.encoder.as_ref(), batch_size, seed)?;
        if self.setup.n_out > 1 && self.setup.banks.len() > 1 {
            batch.embed_outputs(self.setup.offsets[f], self.setup.n_out);
        }
        Ok(batch)
    }

    pub fn save(&self, path: &Path, step: u64) -> Result<()> {
        let header = CheckpointHeader {
            shape: self.params.shape(),
            seed: self.config.seed,
            step,
            encoder_seed: self.setup.encoder.as_ref().map(|e| e.seed()),
            config: serde_json::to_value(&self.config)?,
        };
        checkpoint::save(path, &self.params, &header)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let (params, header) = checkpoint::load(path)?;
        let config: TrainConfig = serde_json::from_value(header.config)?;
        Self::new(config, params)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub config: TrainConfig,
    pub initial_loss: f64,
    /// `(step, mean loss over the preceding window)`.
    pub loss_curve: Vec<(usize, f64)>,
    /// `(step, mean accuracy over all tasks)`.
    pub accuracy_curve: Vec<(usize, f64)>,
    /// Per-task accuracy on fresh trials, families concatenated.
    pub final_accuracy: Vec<f64>,
    pub mean_accuracy: f64,
    /// Number of batches drawn from each family.
    pub family_counts: Vec<usize>,
    pub wall_clock_s: f64,
    pub checkpoint_path: Option<String>,
}

/// Trains on every family in `cfg.banks`, interleaving when there are
/// several.
pub fn train(cfg: &TrainConfig) -> Result<(TrainedNet, TrainReport)> {
    let start = Instant::now();
    let setup = TrainSetup::new(cfg)?;
    let mut init_rng = seed::derived_rng(cfg.seed, &[stream::INIT]);
    let params = LeakyRnnParams::init_with(setup.net_shape(cfg), cfg.init, &mut init_rng)?;
    let mut net = TrainedNet {
        config: cfg.clone(),
        setup,
        params,
    };
    let mut adam = AdamState::new(&net.params, cfg.lr);
    let mut family_rng = seed::derived_rng(cfg.seed, &[stream::FAMILY]);
    let n_families = net.setup.banks.len();
    let mut family_counts = vec![0; n_families];

    let mut initial_loss = f64::NAN;
    let mut loss_curve = Vec::new();
    let mut accuracy_curve = Vec::new();
    let mut window = 0.0;
    let mut window_len = 0;
    for step in 0..cfg.n_batches {
        let f = if n_families > 1 {
            family_rng.random_range(0..n_families)
        } else {
            0
        };
        family_counts[f] += 1;
        let batch = net.batch(f, cfg.sigma, cfg.batch_size, seed::derive(cfg.seed, &[stream::DATA, step as u64]))?;
        let targets = to_time_major(batch.targets.view());
        let mask = to_time_major(batch.loss_mask.view());
        let inputs = to_time_major(batch.inputs.view());
        let (loss, mut grads, _) = backward_time_major(&net.params, inputs, targets.view(), mask.view())
            .map_err(|e| Error::Divergence(format!("step {step}: {e}")))?;
        if step == 0 {
            initial_loss = loss;
        }
        if let Some(max) = cfg.clip_norm {
            grads.clip_norm(max);
        }
        adam.update(&mut net.params, &grads)
            .map_err(|e| Error::Divergence(format!("step {step}: {e}")))?;
        window += loss;
        window_len += 1;
        if (step + 1) % cfg.log_every == 0 || step + 1 == cfg.n_batches {
            loss_curve.push((step + 1, window / window_len as f64));
            window = 0.0;
            window_len = 0;
        }
        if (step + 1) % cfg.eval_every == 0 && step + 1 < cfg.n_batches {
            let acc = evaluate_all(&net, cfg.eval_trials, seed::derive(cfg.seed, &[stream::EVAL, step as u64 + 1]))?;
            let mean = mean(&acc);
            log::info!("seed {} step {}: loss {:.5} accuracy {:.4}", cfg.seed, step + 1, loss, mean);
            accuracy_curve.push((step + 1, mean));
        }
    }
    let final_accuracy = evaluate_all(&net, cfg.eval_trials, seed::derive(cfg.seed, &[stream::EVAL, u64::MAX]))?;
    let mean_accuracy = mean(&final_accuracy);
    accuracy_curve.push((cfg.n_batches, mean_accuracy));
    let report = TrainReport {
        config: cfg.clone(),
        initial_loss,
        loss_curve,
        accuracy_curve,
        final_accuracy,
        mean_accuracy,
        family_counts,
        wall_clock_s: start.elapsed().as_secs_f64(),
        checkpoint_path: None,
    };
    Ok((net, report))
}

/// Interleaved training over several families sharing one latent space.
pub fn train_interleaved(cfg: &TrainConfig, banks: &[TaskBank]) -> Result<(TrainedNet, TrainReport)> {
    if banks.is_empty() {
        return Err(invalid("interleaved training needs at least one bank"));
    }
    if banks.iter().any(|b| b.dim() != cfg.d) {
        return Err(invalid("all banks must share the config's latent dimension"));
    }
    let cfg = TrainConfig {
        banks: banks.iter().map(|b| BankSpec::Explicit { bank: b.clone() }).collect(),
        ..cfg.clone()
    };
    train(&cfg)
}

/// The rule-cued control network on raw streams.
pub fn train_context_dependent(cfg: &TrainConfig) -> Result<(TrainedNet, TrainReport)> {
    let cfg = TrainConfig {
        mode: TrialMode::ContextDependent,
        banks: vec![BankSpec::Context],
        ..cfg.clone()
    };
    train(&cfg)
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len().max(1) as f64
}

/// Per-task accuracy of every family, concatenated in family order.
pub fn evaluate_all(net: &TrainedNet, n_trials: usize, seed: u64) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for f in 0..net.setup.banks.len() {
        out.extend(evaluate_accuracy(net, f, net.config.sigma, n_trials, seed::derive(seed, &[f as u64]))?);
    }
    Ok(out)
}

/// Per-task accuracy of family `f` on `n_trials` fresh trials.
///
/// Fixed reaction time: sign of the final output against the label.
/// Free reaction time: sign of the final output against the sign of the
/// final accumulator, over trials where it is nonzero. Context-dependent:
/// one accuracy per rule.
pub fn evaluate_accuracy(net: &TrainedNet, f: usize, sigma: f64, n_trials: usize, seed: u64) -> Result<Vec<f64>> {
    if n_trials == 0 {
        return Err(invalid("accuracy needs at least one trial"));
    }
    match net.config.mode {
        TrialMode::ContextDependent => {
            let n_rules = net.setup.banks[f].n_tasks();
            (0..n_rules)
                .map(|r| {
                    let batch = net.batch_with_rule(f, sigma, n_trials, seed::derive(seed, &[r as u64]), Some(r))?;
                    Ok(sign_accuracy(net, &batch, 0, 1)?[0])
                })
                .collect()
        }
        _ => {
            let batch = net.batch(f, sigma, n_trials, seed)?;
            let (offset, width) = net.setup.slot(f);
            sign_accuracy(net, &batch, offset, width)
        }
    }
}

fn sign_accuracy(net: &TrainedNet, batch: &TrialBatch, offset: usize, width: usize) -> Result<Vec<f64>> {
    let traj = forward_batch(&net.params, batch.inputs.view())?;
    let last = traj.n_steps() - 1;
    let outputs = traj.outputs.index_axis(Axis(0), last);
    let targets = batch.targets.slice(s![.., last, ..]);
    let mut acc = Vec::with_capacity(width);
    for k in offset..offset + width {
        let mut correct = 0usize;
        let mut counted = 0usize;
        for i in 0..batch.batch_size() {
            let tg = targets[[i, k]];
            if tg == 0.0 {
                continue;
            }
            counted += 1;
            if outputs[[i, k]] * tg > 0.0 {
                correct += 1;
            }
        }
        acc.push(if counted == 0 { 0.5 } else { correct as f64 / counted as f64 });
    }
    Ok(acc)
}
