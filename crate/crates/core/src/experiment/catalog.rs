//! The experiment catalog: one entry per reproduced result, each a sweep
//! over task count, latent dimension, training noise, factor correlation
//! and a handful of architecture or task-family variants.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::net::Leak;
use crate::tasks::batch::{TrialMode, DEFAULT_DELAY_STEPS};
use crate::tasks::BankMode;
use crate::train::{BankSpec, TrainConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ExperimentId {
    E1,
    E2,
    E3,
    E4,
    E5,
    E6,
    E7,
    E8,
    E9,
    E10,
    E11,
}

impl ExperimentId {
    pub const ALL: [ExperimentId; 11] = [
        Self::E1,
        Self::E2,
        Self::E3,
        Self::E4,
        Self::E5,
        Self::E6,
        Self::E7,
        Self::E8,
        Self::E9,
        Self::E10,
        Self::E11,
    ];

    pub fn title(self) -> &'static str {
        match self {
            Self::E1 => "multitask network on 24 linear partitions of a 2-D latent space",
            Self::E2 => "OOD and ID decoding against the number of tasks",
            Self::E3 => "architecture and trial-layout variants",
            Self::E4 => "latent dimension by task count grid",
            Self::E5 => "training noise sweep, tested at sigma 0.2",
            Self::E6 => "correlated latent factors, tested on uncorrelated latents",
            Self::E7 => "multiplicative boundaries, alone and interleaved with linear ones",
            Self::E8 => "free reaction time accumulator with a bound of 5",
            Self::E9 => "boundaries tiling only quadrants 1 and 3",
            Self::E10 => "context-dependent control with a one-hot rule cue",
            Self::E11 => "optimal decoding r^2 over time, analytic and Monte Carlo",
        }
    }

    /// Experiments this entry reproduces, named as in
    /// [`IN_SCOPE_EXPERIMENTS`].
    pub fn covers(self) -> &'static [&'static str] {
        match self {
            Self::E1 => &["multitask", "fixed points", "activation stats"],
            Self::E2 => &["task count"],
            Self::E3 => &["architectures", "delay period"],
            Self::E4 => &["dimension grid"],
            Self::E5 => &["noise sweep", "noise-free control"],
            Self::E6 => &["factor correlation"],
            Self::E7 => &["multiplicative", "interleaved"],
            Self::E8 => &["free reaction time", "r2 over time"],
            Self::E9 => &["half-space coverage"],
            Self::E10 => &["context-dependent"],
            Self::E11 => &["theoretical r2"],
        }
    }
}

/// Every in-scope experiment of the reproduced study.
pub const IN_SCOPE_EXPERIMENTS: &[&str] = &[
    "multitask",
    "fixed points",
    "activation stats",
    "task count",
    "architectures",
    "delay period",
    "dimension grid",
    "noise sweep",
    "noise-free control",
    "factor correlation",
    "multiplicative",
    "interleaved",
    "free reaction time",
    "r2 over time",
    "half-space coverage",
    "context-dependent",
    "theoretical r2",
];

impl fmt::Display for ExperimentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

impl FromStr for ExperimentId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .iter()
            .copied()
            .find(|id| id.to_string().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| invalid(format!("unknown experiment id {s:?} (expected E1..E11)")))
    }
}

/// Network or task-family variant applied on top of the base config.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Base,
    /// Leaky integration with `dt = tau / 5`. The default `dt = tau` makes
    /// the leaky update coincide with the vanilla one.
    SlowLeak,
    /// Evidence stops a few steps before the decision.
    Delay,
    /// The 48 multiplicative boundaries alone.
    Multiplicative,
    /// Linear and multiplicative families, one family per batch.
    Interleaved,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Self::Base => "base",
            Self::SlowLeak => "slow_leak",
            Self::Delay => "delay",
            Self::Multiplicative => "multiplicative",
            Self::Interleaved => "interleaved",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepAxes {
    pub n_tasks: Vec<usize>,
    pub d: Vec<usize>,
    pub sigma_train: Vec<f64>,
    pub rho: Vec<f64>,
    pub variants: Vec<Variant>,
}

impl SweepAxes {
    /// A single cell at the base config's values.
    pub fn single(base: &TrainConfig) -> Self {
        let n_tasks = match base.banks.first() {
            Some(BankSpec::Linear { n_tasks, .. }) => *n_tasks,
            Some(b) => b.build(base.d, base.seed, 0).map(|b| b.n_tasks()).unwrap_or(1),
            None => 1,
        };
        Self {
            n_tasks: vec![n_tasks],
            d: vec![base.d],
            sigma_train: vec![base.sigma],
            rho: vec![base.rho],
            variants: vec![Variant::Base],
        }
    }

    pub fn n_cells(&self) -> usize {
        self.n_tasks.len() * self.d.len() * self.sigma_train.len() * self.rho.len() * self.variants.len()
    }
}

/// Extra analyses run on every network of an experiment.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Analyses {
    pub fixed_points: bool,
    pub activation: bool,
    pub over_time: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub id: ExperimentId,
    pub base: TrainConfig,
    pub axes: SweepAxes,
    /// Networks per cell; network `r` uses seed `root_seed + r`.
    pub repeats: usize,
    /// Decoding repeats per network, each giving one fold per orthant group.
    pub decode_repeats: usize,
    /// Noise level of the decoding trials.
    pub test_sigma: f64,
    /// Latent correlation of the decoding trials.
    pub test_rho: f64,
    pub analyses: Analyses,
}

/// One point of the sweep grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub index: usize,
    pub n_tasks: usize,
    pub d: usize,
    pub sigma_train: f64,
    pub rho: f64,
    pub variant: Variant,
}

impl ExperimentSpec {
    /// The catalog entry for `id`. Long sweeps default to fewer networks
    /// per cell; `full` restores five.
    pub fn catalog(id: ExperimentId, full: bool) -> Self {
        let base = match id {
            ExperimentId::E8 => TrainConfig::free_rt(),
            ExperimentId::E10 => TrainConfig::context_dependent(),
            _ => TrainConfig::default(),
        };
        let mut spec = Self {
            id,
            axes: SweepAxes::single(&base),
            base,
            repeats: 5,
            decode_repeats: crate::analysis::decode::DEFAULT_REPEATS,
            test_sigma: 0.2,
            test_rho: 0.0,
            analyses: Analyses::default(),
        };
        match id {
            ExperimentId::E1 => {
                spec.analyses.fixed_points = true;
                spec.analyses.activation = true;
            }
            ExperimentId::E2 => spec.axes.n_tasks = vec![2, 3, 4, 6, 8, 12, 16, 24],
            ExperimentId::E3 => spec.axes.variants = vec![Variant::Base, Variant::SlowLeak, Variant::Delay],
            ExperimentId::E4 => {
                spec.axes.d = vec![2, 3, 4, 6, 8];
                spec.axes.n_tasks = vec![1, 2, 3, 4, 6, 8, 12, 16, 24];
                spec.repeats = if full { 5 } else { 2 };
            }
            ExperimentId::E5 => spec.axes.sigma_train = vec![0.0, 0.05, 0.1, 0.2, 0.4, 0.8],
            ExperimentId::E6 => spec.axes.rho = vec![0.0, 0.5, 0.9, 0.97, 1.0],
            ExperimentId::E7 => spec.axes.variants = vec![Variant::Multiplicative, Variant::Interleaved],
            ExperimentId::E8 => spec.analyses.over_time = true,
            ExperimentId::E9 => {
                spec.base.banks = vec![BankSpec::Linear {
                    n_tasks: 24,
                    mode: BankMode::Quadrants13Only,
                }];
            }
            ExperimentId::E10 => spec.axes.n_tasks = vec![2],
            ExperimentId::E11 => spec.repeats = 1,
        }
        spec
    }

    pub fn is_analytic(&self) -> bool {
        self.id == ExperimentId::E11
    }

    pub fn validate(&self) -> Result<()> {
        let a = &self.axes;
        let empty = [
            ("n_tasks", a.n_tasks.is_empty()),
            ("d", a.d.is_empty()),
            ("sigma_train", a.sigma_train.is_empty()),
            ("rho", a.rho.is_empty()),
            ("variants", a.variants.is_empty()),
        ];
        if let Some((name, _)) = empty.iter().find(|(_, e)| *e) {
            return Err(invalid(format!("sweep axis {name} is empty")));
        }
        if self.repeats == 0 || self.decode_repeats == 0 {
            return Err(invalid("repeats must be at least 1"));
        }
        if !(self.test_sigma > 0.0) {
            return Err(invalid("test sigma must be positive"));
        }
        if self.is_analytic() {
            return Ok(());
        }
        for cell in self.cells() {
            self.cell_config(&cell, 0)?.validate()?;
        }
        Ok(())
    }

    /// Cells in row-major order over (variant, d, n_tasks, sigma, rho).
    pub fn cells(&self) -> Vec<Cell> {
        let a = &self.axes;
        let mut out = Vec::with_capacity(a.n_cells());
        for &variant in &a.variants {
            for &d in &a.d {
                for &n_tasks in &a.n_tasks {
                    for &sigma_train in &a.sigma_train {
                        for &rho in &a.rho {
                            out.push(Cell {
                                index: out.len(),
                                n_tasks,
                                d,
                                sigma_train,
                                rho,
                                variant,
                            });
                        }
                    }
                }
            }
        }
        out
    }

    /// The training config of network `repeat` in `cell`.
    pub fn cell_config(&self, cell: &Cell, repeat: usize) -> Result<TrainConfig> {
        let mut cfg = self.base.clone();
        cfg.d = cell.d;
        cfg.sigma = cell.sigma_train;
        cfg.rho = cell.rho;
        cfg.seed = self.base.seed.wrapping_add(repeat as u64);
        if cfg.mode != TrialMode::ContextDependent {
            if let Some(BankSpec::Linear { n_tasks, mode }) = cfg.banks.first_mut() {
                *n_tasks = cell.n_tasks;
                // Evenly rotated boundaries only exist in two dimensions.
                if cell.d != 2 && *mode == BankMode::UniformAngles2d {
                    *mode = BankMode::RandomHyperplanes;
                }
            }
        }
        let linear24 = BankSpec::Linear {
            n_tasks: cell.n_tasks,
            mode: BankMode::UniformAngles2d,
        };
        match cell.variant {
            Variant::Base => {}
            Variant::SlowLeak => {
                cfg.leak = Leak::Leaky;
                cfg.dt = cfg.tau / 5.0;
            }
            Variant::Delay => cfg.delay_steps = DEFAULT_DELAY_STEPS,
            Variant::Multiplicative => cfg.banks = vec![BankSpec::Multiplicative],
            Variant::Interleaved => cfg.banks = vec![linear24, BankSpec::Multiplicative],
        }
        if cfg.sigma < 0.0 {
            return Err(invalid("training sigma must be non-negative"));
        }
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn catalog_covers_every_in_scope_experiment() {
        for name in IN_SCOPE_EXPERIMENTS {
            let n = ExperimentId::ALL.iter().filter(|id| id.covers().contains(name)).count();
            assert!(n >= 1, "{name} not covered");
        }
        for id in ExperimentId::ALL {
            for c in id.covers() {
                assert!(IN_SCOPE_EXPERIMENTS.contains(c), "{id} covers unknown {c}");
            }
            ExperimentSpec::catalog(id, false).validate().unwrap();
        }
    }

    #[test]
    fn ids_parse_and_are_unique() {
        for id in ExperimentId::ALL {
            assert_eq!(id.to_string().parse::<ExperimentId>().unwrap(), id);
        }
        assert_eq!("e4".parse::<ExperimentId>().unwrap(), ExperimentId::E4);
        assert!("E12".parse::<ExperimentId>().is_err());
        let mut ids: Vec<_> = ExperimentId::ALL.to_vec();
        ids.dedup();
        assert_eq!(ids.len(), 11);
    }

    #[test]
    fn empty_axis_is_rejected() {
        let mut spec = ExperimentSpec::catalog(ExperimentId::E2, false);
        spec.axes.n_tasks.clear();
        assert!(spec.validate().is_err());
        let mut spec = ExperimentSpec::catalog(ExperimentId::E2, false);
        spec.repeats = 0;
        assert!(spec.validate().is_err());
    }

    #[test]
    fn grid_sizes() {
        let e4 = ExperimentSpec::catalog(ExperimentId::E4, false);
        assert_eq!(e4.cells().len(), 45);
        assert_eq!(e4.repeats, 2);
        assert_eq!(ExperimentSpec::catalog(ExperimentId::E4, true).repeats, 5);
        let e2 = ExperimentSpec::catalog(ExperimentId::E2, false);
        assert_eq!(e2.cells().len(), 8);
        assert_eq!(e2.repeats * e2.decode_repeats * 4, 100);
    }

    #[test]
    fn cell_configs_apply_the_axes() {
        let spec = ExperimentSpec::catalog(ExperimentId::E7, false);
        let cells = spec.cells();
        let m = spec.cell_config(&cells[0], 2).unwrap();
        assert_eq!(m.banks, vec![BankSpec::Multiplicative]);
        assert_eq!(m.seed, 2);
        assert_eq!(spec.cell_config(&cells[1], 0).unwrap().banks.len(), 2);
        let e3 = ExperimentSpec::catalog(ExperimentId::E3, false);
        let c = e3.cells();
        assert_eq!(e3.cell_config(&c[1], 0).unwrap().dt, 20.0);
        assert_eq!(e3.cell_config(&c[2], 0).unwrap().delay_steps, DEFAULT_DELAY_STEPS);
    }

    #[test]
    fn every_grid_cell_builds_its_banks() {
        let spec = ExperimentSpec::catalog(ExperimentId::E4, false);
        for cell in spec.cells() {
            let cfg = spec.cell_config(&cell, 0).unwrap();
            let setup = crate::train::TrainSetup::new(&cfg).unwrap();
            assert_eq!(setup.banks[0].dim(), cell.d);
        }
    }
}
