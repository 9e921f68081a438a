use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::net::{InitScheme, Leak, NetShape, Readout, LR_FIXED_RT, LR_FREE_RT};
use crate::seed::{self, stream};
use crate::tasks::batch::{context_bank, input_width, TrialConfig, TrialMode};
use crate::tasks::encoder::{build_encoder, EncoderParams, ENCODER_WIDTHS};
use crate::tasks::{default_product_bank, make_linear_taskbank, BankMode, TaskBank};

/// A task family to train on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BankSpec {
    Linear { n_tasks: usize, mode: BankMode },
    /// The default 48-curve product bank.
    Multiplicative,
    /// The two cued tasks of the context-dependent control.
    Context,
    Explicit { bank: TaskBank },
}

impl BankSpec {
    pub fn build(&self, d: usize, root_seed: u64, family: usize) -> Result<TaskBank> {
        let mut rng = seed::derived_rng(root_seed, &[stream::BANK, family as u64]);
        Ok(match self {
            BankSpec::Linear { n_tasks, mode } => TaskBank::Linear(make_linear_taskbank(d, *n_tasks, *mode, &mut rng)?),
            BankSpec::Multiplicative => TaskBank::Multiplicative(default_product_bank()),
            BankSpec::Context => TaskBank::Linear(context_bank()),
            BankSpec::Explicit { bank } => bank.clone(),
        })
    }
}

fn default_eval_every() -> usize {
    2000
}

fn default_eval_trials() -> usize {
    1000
}

fn default_log_every() -> usize {
    100
}

/// Training hyperparameters. Defaults follow the reference setup: `dt = tau
/// = 100 ms`, 64 units, `sigma = 0.2`, 20 steps, batches of 16, `1e5`
/// batches, two latent dimensions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub dt: f64,
    pub tau: f64,
    pub n_hidden: usize,
    pub sigma: f64,
    pub t_steps: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub n_batches: usize,
    pub d: usize,
    pub mode: TrialMode,
    pub banks: Vec<BankSpec>,
    pub seed: u64,
    #[serde(default = "default_eval_every")]
    pub eval_every: usize,
    #[serde(default = "default_eval_trials")]
    pub eval_trials: usize,
    #[serde(default = "default_log_every")]
    pub log_every: usize,
    #[serde(default)]
    pub delay_steps: usize,
    /// Drop fixation-period outputs from the loss.
    #[serde(default = "default_true")]
    pub mask_fixation: bool,
    #[serde(default)]
    pub rho: f64,
    #[serde(default)]
    pub clip_norm: Option<f64>,
    #[serde(default = "default_leak")]
    pub leak: Leak,
    /// Output nonlinearity; `None` picks `5 tanh` for free reaction time and
    /// `tanh` otherwise.
    #[serde(default)]
    pub readout: Option<Readout>,
    #[serde(default)]
    pub init: InitScheme,
}

fn default_true() -> bool {
    true
}

fn default_leak() -> Leak {
    Leak::Leaky
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            dt: 100.0,
            tau: 100.0,
            n_hidden: 64,
            sigma: 0.2,
            t_steps: 20,
            lr: LR_FIXED_RT,
            batch_size: 16,
            n_batches: 100_000,
            d: 2,
            mode: TrialMode::FixedRt,
            banks: vec![BankSpec::Linear {
                n_tasks: 24,
                mode: BankMode::UniformAngles2d,
            }],
            seed: 0,
            eval_every: default_eval_every(),
            eval_trials: default_eval_trials(),
            log_every: default_log_every(),
            delay_steps: 0,
            mask_fixation: true,
            rho: 0.0,
            clip_norm: None,
            leak: Leak::Leaky,
            readout: None,
            init: InitScheme::default(),
        }
    }
}

impl TrainConfig {
    /// Free reaction time defaults: 24 boundaries, `lr = 3e-3`, `5 tanh` readout.
    pub fn free_rt() -> Self {
        Self {
            mode: TrialMode::FreeRt,
            lr: LR_FREE_RT,
            ..Self::default()
        }
    }

    /// The rule-cued control: raw streams, two tasks, one output.
    pub fn context_dependent() -> Self {
        Self {
            mode: TrialMode::ContextDependent,
            banks: vec![BankSpec::Context],
            ..Self::default()
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| invalid(format!("config: {e}")))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn readout(&self) -> Readout {
        self.readout.unwrap_or(match self.mode {
            TrialMode::FreeRt => Readout::ScaledTanh5,
            _ => Readout::Tanh,
        })
    }

    pub fn trial_config(&self, sigma: f64) -> TrialConfig {
        TrialConfig {
            mode: self.mode,
            t_steps: self.t_steps,
            sigma,
            dt: self.dt,
            delay_steps: self.delay_steps,
            mask_fixation: self.mask_fixation,
            rho: self.rho,
            rule: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.banks.is_empty() {
            return Err(invalid("at least one task family is required"));
        }
        if !(self.tau > 0.0 && self.dt > 0.0 && self.dt <= self.tau) {
            return Err(invalid("need 0 < dt <= tau"));
        }
        if self.n_hidden == 0 || self.batch_size == 0 || self.d == 0 {
            return Err(invalid("n_hidden, batch_size and d must be positive"));
        }
        if !(self.lr > 0.0) {
            return Err(invalid("learning rate must be positive"));
        }
        if self.eval_every == 0 || self.log_every == 0 {
            return Err(invalid("eval_every and log_every must be positive"));
        }
        if self.mode == TrialMode::ContextDependent && self.banks.len() != 1 {
            return Err(invalid("context-dependent training uses a single two-task family"));
        }
        if self.mode == TrialMode::ContextDependent && self.d != 2 {
            return Err(invalid("context-dependent training needs D = 2"));
        }
        self.trial_config(self.sigma).validate()
    }
}

/// Everything derived deterministically from a config: banks, encoder and
/// the output layout.
#[derive(Debug, Clone)]
pub struct TrainSetup {
    pub banks: Vec<TaskBank>,
    pub encoder: Option<EncoderParams>,
    /// Start of each family's slot in the output layer.
    pub offsets: Vec<usize>,
    pub n_in: usize,
    pub n_out: usize,
}

impl TrainSetup {
    pub fn new(cfg: &TrainConfig) -> Result<Self> {
        cfg.validate()?;
        let banks = cfg
            .banks
            .iter()
            .enumerate()
            .map(|(i, b)| b.build(cfg.d, cfg.seed, i))
            .collect::<Result<Vec<_>>>()?;
        for bank in &banks {
            if bank.dim() != cfg.d {
                return Err(invalid(format!("bank has D = {}, config has D = {}", bank.dim(), cfg.d)));
            }
            if cfg.mode == TrialMode::FreeRt && bank.as_linear().is_none() {
                return Err(invalid("free reaction time training needs linear banks"));
            }
        }
        let encoder = match cfg.mode {
            TrialMode::ContextDependent => None,
            _ => Some(build_encoder(seed::derive(cfg.seed, &[stream::ENCODER]), cfg.d)),
        };
        let (offsets, n_out) = match cfg.mode {
            TrialMode::ContextDependent => (vec![0], 1),
            _ => {
                let mut offsets = Vec::with_capacity(banks.len());
                let mut total = 0;
                for bank in &banks {
                    offsets.push(total);
                    total += bank.n_tasks();
                }
                (offsets, total)
            }
        };
        let n_rules = banks[0].n_tasks();
        let n_in = input_width(cfg.mode, ENCODER_WIDTHS[2], cfg.d, n_rules);
        Ok(Self {
            banks,
            encoder,
            offsets,
            n_in,
            n_out,
        })
    }

    pub fn net_shape(&self, cfg: &TrainConfig) -> NetShape {
        NetShape {
            n_hidden: cfg.n_hidden,
            n_in: self.n_in,
            n_out: self.n_out,
            tau: cfg.tau,
            dt: cfg.dt,
            leak: cfg.leak,
            readout: cfg.readout(),
        }
    }

    /// Output slot `(offset, width)` of family `f`.
    pub fn slot(&self, f: usize) -> (usize, usize) {
        let width = if self.n_out == 1 { 1 } else { self.banks[f].n_tasks() };
        (self.offsets[f], width)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_reference_table() {
        let c = TrainConfig::default();
        assert_eq!((c.dt, c.tau, c.n_hidden, c.sigma, c.t_steps), (100.0, 100.0, 64, 0.2, 20));
        assert_eq!((c.lr, c.batch_size, c.n_batches, c.d), (1e-3, 16, 100_000, 2));
        assert_eq!(TrainConfig::free_rt().lr, 3e-3);
        assert_eq!(TrainConfig::free_rt().readout(), Readout::ScaledTanh5);
    }

    #[test]
    fn toml_and_json_configs() {
        let c = TrainConfig::from_toml(
            r#"
            dt = 100.0
            tau = 100.0
            n_hidden = 32
            sigma = 0.1
            t_steps = 10
            lr = 0.001
            batch_size = 8
            n_batches = 50
            d = 2
            mode = "fixed_rt"
            seed = 4
            [[banks]]
            kind = "linear"
            n_tasks = 6
            mode = "uniform_angles_2d"
            "#,
        );
        let c = c.unwrap();
        assert_eq!(c.n_hidden, 32);
        assert_eq!(c.eval_every, 2000);
        let back = TrainConfig::from_json(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn setup_layouts() {
        let s = TrainSetup::new(&TrainConfig::default()).unwrap();
        assert_eq!((s.n_in, s.n_out), (41, 24));
        let mut cfg = TrainConfig::default();
        cfg.banks.push(BankSpec::Multiplicative);
        let s = TrainSetup::new(&cfg).unwrap();
        assert_eq!((s.n_out, s.offsets.clone()), (72, vec![0, 24]));
        let s = TrainSetup::new(&TrainConfig::context_dependent()).unwrap();
        assert_eq!((s.n_in, s.n_out), (5, 1));
        assert!(s.encoder.is_none());
        let bad = TrainConfig {
            banks: vec![],
            ..TrainConfig::default()
        };
        assert!(TrainSetup::new(&bad).is_err());
    }
}
