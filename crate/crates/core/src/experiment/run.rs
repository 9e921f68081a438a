//! Sweep execution: a bounded worker pool over (cell, network) jobs, with
//! per-network result files, an optional checkpoint cache shared between
//! experiments and a manifest written once at the end.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analysis::{
    self, activation_stats, network_fixed_points, pca, r2_over_time, ActivationStats, DecodeReport, FixedPointConfig,
    TimePoint, DECODE_TRIALS,
};
use crate::error::{Error, Result};
use crate::experiment::catalog::{Cell, ExperimentId, ExperimentSpec};
use crate::seed::{self, stream};
use crate::tasks::latents::LATENT_VARIANCE;
use crate::theory::{monte_carlo_optimal_r2, theoretical_r2};
use crate::train::{train, TrainConfig, TrainReport, TrainedNet};

/// Bumped whenever cached checkpoints stop being valid for a config.
const CACHE_VERSION: u32 = 1;
/// Monte Carlo trials per step for the analytic experiment.
pub const ANALYTIC_TRIALS: usize = 100_000;
/// Steps covered by the analytic experiment.
pub const ANALYTIC_STEPS: usize = 20;
pub const FIXED_POINT_SEEDS: usize = 256;
pub const ACTIVATION_GRID: usize = 8;

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub out_dir: PathBuf,
    pub workers: usize,
    /// Directory of trained checkpoints keyed by config hash.
    pub cache_dir: Option<PathBuf>,
    /// Reuse network results already present in `out_dir`.
    pub resume: bool,
}

impl RunOptions {
    pub fn new(out_dir: impl Into<PathBuf>) -> Self {
        Self {
            out_dir: out_dir.into(),
            workers: 1,
            cache_dir: None,
            resume: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Status {
    Ok,
    Failed { error: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSummary {
    pub initial_loss: f64,
    pub final_loss: f64,
    pub final_accuracy: Vec<f64>,
    pub mean_accuracy: f64,
    pub wall_clock_s: f64,
}

impl From<&TrainReport> for TrainSummary {
    fn from(r: &TrainReport) -> Self {
        Self {
            initial_loss: r.initial_loss,
            final_loss: r.loss_curve.last().map_or(f64::NAN, |&(_, l)| l),
            final_accuracy: r.final_accuracy.clone(),
            mean_accuracy: r.mean_accuracy,
            wall_clock_s: r.wall_clock_s,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedPointSummary {
    pub n_seeds: usize,
    pub n_converged: usize,
    pub n_points: usize,
    /// Variance fraction of the top two principal components of the points.
    pub pca2: Option<f64>,
    pub config: FixedPointConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalyticPoint {
    pub t: usize,
    pub theory: f64,
    pub monte_carlo: f64,
}

/// Everything measured on one network (or one analytic repeat).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetResult {
    pub id: ExperimentId,
    pub cell: Cell,
    pub repeat: usize,
    pub root_seed: u64,
    pub config: TrainConfig,
    #[serde(flatten)]
    pub status: Status,
    pub train: Option<TrainSummary>,
    pub decode: Option<DecodeReport>,
    pub over_time: Option<Vec<TimePoint>>,
    pub fixed_points: Option<FixedPointSummary>,
    pub activation: Option<ActivationStats>,
    pub analytic: Option<Vec<AnalyticPoint>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestNet {
    pub repeat: usize,
    pub seed: u64,
    #[serde(flatten)]
    pub status: Status,
    /// Relative to the output directory.
    pub result: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestCell {
    pub cell: Cell,
    pub nets: Vec<ManifestNet>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub id: ExperimentId,
    pub title: String,
    pub version: String,
    pub root_seed: u64,
    pub spec: ExperimentSpec,
    pub cells: Vec<ManifestCell>,
    pub n_failed: usize,
}

impl Manifest {
    pub const FILE: &'static str = "manifest.json";

    pub fn load(dir: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&fs::read_to_string(dir.join(Self::FILE))?)?)
    }
}

pub fn cell_dir(cell: &Cell) -> String {
    format!("cells/c{:03}", cell.index)
}

fn result_rel(cell: &Cell, repeat: usize) -> String {
    format!("{}/net{repeat}.json", cell_dir(cell))
}

/// Hex digest identifying a training config in the checkpoint cache.
pub fn config_key(cfg: &TrainConfig) -> Result<String> {
    let text = serde_json::to_string(cfg)?;
    let mut h = Sha256::new();
    h.update(CACHE_VERSION.to_le_bytes());
    h.update(text.as_bytes());
    Ok(h.finalize().iter().take(12).map(|b| format!("{b:02x}")).collect())
}

/// Trains `cfg`, or loads it from `cache_dir` when an identical config was
/// trained before. Returns the network and the report of its training run.
pub fn train_cached(cfg: &TrainConfig, cache_dir: Option<&Path>) -> Result<(TrainedNet, TrainReport)> {
    let Some(dir) = cache_dir else {
        return train(cfg);
    };
    let key = config_key(cfg)?;
    let ck = dir.join(format!("{key}.evck"));
    let rep = dir.join(format!("{key}.report.json"));
    if ck.exists() && rep.exists() {
        let loaded = TrainedNet::load(&ck).and_then(|net| {
            let report: TrainReport = serde_json::from_str(&fs::read_to_string(&rep)?)?;
            Ok((net, report))
        });
        match loaded {
            Ok((net, report)) if net.config == *cfg && report.config == *cfg => return Ok((net, report)),
            Ok(_) => log::warn!("cache entry {key} does not match its config; retraining"),
            Err(e) => log::warn!("cache entry {key} unreadable ({e}); retraining"),
        }
    }
    let (net, mut report) = train(cfg)?;
    fs::create_dir_all(dir)?;
    net.save(&ck, cfg.n_batches as u64)?;
    report.checkpoint_path = Some(ck.display().to_string());
    write_atomic(&rep, serde_json::to_string_pretty(&report)?.as_bytes())?;
    Ok((net, report))
}

pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("partial");
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Decoding and the extra analyses of one trained network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetAnalysis {
    pub decode: DecodeReport,
    pub over_time: Option<Vec<TimePoint>>,
    pub fixed_points: Option<FixedPointSummary>,
    pub activation: Option<ActivationStats>,
}

pub fn analyze(spec: &ExperimentSpec, net: &TrainedNet) -> Result<NetAnalysis> {
    let s = net.config.seed;
    let mut test_net = net.clone();
    test_net.config.rho = spec.test_rho;
    let decode = analysis::decode_network(&test_net, 0, spec.test_sigma, spec.decode_repeats, s)?;
    let over_time = if spec.analyses.over_time {
        Some(r2_over_time(&test_net, DECODE_TRIALS, spec.decode_repeats, s)?)
    } else {
        None
    };
    let fixed_points = if spec.analyses.fixed_points {
        let cfg = FixedPointConfig::default();
        let set = network_fixed_points(net, FIXED_POINT_SEEDS, &cfg, s)?;
        let pca2 = if set.len() >= 3 {
            Some(pca(set.points.view())?.cumulative(2))
        } else {
            None
        };
        Some(FixedPointSummary {
            n_seeds: set.n_seeds,
            n_converged: set.n_converged,
            n_points: set.len(),
            pca2,
            config: cfg,
        })
    } else {
        None
    };
    let activation = if spec.analyses.activation && net.config.d == 2 {
        Some(activation_stats(net, 0, ACTIVATION_GRID)?)
    } else {
        None
    };
    Ok(NetAnalysis {
        decode,
        over_time,
        fixed_points,
        activation,
    })
}

/// `1 - sigma^2 / (t var_x)` against brute-force optimal decoding for
/// `t = 1..=ANALYTIC_STEPS`.
pub fn analytic_curve(sigma: f64, d: usize, n_trials: usize, seed: u64) -> Result<Vec<AnalyticPoint>> {
    (1..=ANALYTIC_STEPS)
        .map(|t| {
            let mut rng = seed::derived_rng(seed, &[stream::DECODE, t as u64]);
            Ok(AnalyticPoint {
                t,
                theory: theoretical_r2(t, sigma, LATENT_VARIANCE),
                monte_carlo: monte_carlo_optimal_r2(sigma, t, d, n_trials, &mut rng)?,
            })
        })
        .collect()
}

fn run_net(spec: &ExperimentSpec, cell: &Cell, repeat: usize, opts: &RunOptions) -> Result<NetResult> {
    let cfg = spec.cell_config(cell, repeat)?;
    let dir = opts.out_dir.join(cell_dir(cell));
    fs::create_dir_all(&dir)?;
    let mut result = empty_result(spec, cell, repeat, cfg.clone(), Status::Ok);
    if spec.is_analytic() {
        result.analytic = Some(analytic_curve(cell.sigma_train, cell.d, ANALYTIC_TRIALS, cfg.seed)?);
    } else {
        let (net, report) = train_cached(&cfg, opts.cache_dir.as_deref())?;
        net.save(&dir.join(format!("net{repeat}.evck")), cfg.n_batches as u64)?;
        let a = analyze(spec, &net)?;
        result.train = Some(TrainSummary::from(&report));
        result.decode = Some(a.decode);
        result.over_time = a.over_time;
        result.fixed_points = a.fixed_points;
        result.activation = a.activation;
    }
    Ok(result)
}

fn failed(spec: &ExperimentSpec, cell: &Cell, repeat: usize, err: &Error) -> NetResult {
    let config = spec.cell_config(cell, repeat).unwrap_or_else(|_| spec.base.clone());
    empty_result(spec, cell, repeat, config, Status::Failed { error: err.to_string() })
}

fn empty_result(spec: &ExperimentSpec, cell: &Cell, repeat: usize, config: TrainConfig, status: Status) -> NetResult {
    NetResult {
        id: spec.id,
        cell: *cell,
        repeat,
        root_seed: spec.base.seed,
        config,
        status,
        train: None,
        decode: None,
        over_time: None,
        fixed_points: None,
        activation: None,
        analytic: None,
    }
}

fn load_existing(path: &Path, expect: &TrainConfig) -> Option<NetResult> {
    let r: NetResult = serde_json::from_str(&fs::read_to_string(path).ok()?).ok()?;
    (r.status == Status::Ok && r.config == *expect).then_some(r)
}

/// Runs every network of every cell and writes per-network results, the
/// summary tables and the manifest. Failed networks are recorded and
/// skipped; the returned manifest counts them.
pub fn run_experiment(spec: &ExperimentSpec, opts: &RunOptions) -> Result<Manifest> {
    spec.validate()?;
    fs::create_dir_all(&opts.out_dir)?;
    let cells = spec.cells();
    let jobs: Vec<(usize, usize)> = (0..cells.len())
        .flat_map(|c| (0..spec.repeats).map(move |r| (c, r)))
        .collect();
    let results: Mutex<Vec<Option<NetResult>>> = Mutex::new(vec![None; jobs.len()]);
    let next = AtomicUsize::new(0);
    let workers = opts.workers.clamp(1, jobs.len().max(1));
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let j = next.fetch_add(1, Ordering::SeqCst);
                if j >= jobs.len() {
                    break;
                }
                let (c, r) = jobs[j];
                let cell = &cells[c];
                let path = opts.out_dir.join(result_rel(cell, r));
                let existing = if opts.resume {
                    spec.cell_config(cell, r).ok().and_then(|cfg| load_existing(&path, &cfg))
                } else {
                    None
                };
                let result = existing.unwrap_or_else(|| {
                    log::info!("{} cell {} net {}: running", spec.id, cell.index, r);
                    let res = run_net(spec, cell, r, opts).unwrap_or_else(|e| {
                        log::warn!("{} cell {} net {} failed: {e}", spec.id, cell.index, r);
                        failed(spec, cell, r, &e)
                    });
                    let write = fs::create_dir_all(path.parent().expect("cell dir"))
                        .map_err(Error::from)
                        .and_then(|_| Ok(serde_json::to_string_pretty(&res)?))
                        .and_then(|text| write_atomic(&path, text.as_bytes()));
                    if let Err(e) = write {
                        log::warn!("could not write {}: {e}", path.display());
                    }
                    res
                });
                results.lock().expect("result lock")[j] = Some(result);
            });
        }
    });
    let results = results.into_inner().expect("result lock");
    let mut manifest = Manifest {
        id: spec.id,
        title: spec.id.title().to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        root_seed: spec.base.seed,
        spec: spec.clone(),
        cells: cells
            .iter()
            .map(|cell| ManifestCell {
                cell: *cell,
                nets: Vec::new(),
            })
            .collect(),
        n_failed: 0,
    };
    for (&(c, r), res) in jobs.iter().zip(&results) {
        let res = res.as_ref().expect("every job ran");
        if res.status != Status::Ok {
            manifest.n_failed += 1;
        }
        manifest.cells[c].nets.push(ManifestNet {
            repeat: r,
            seed: res.config.seed,
            status: res.status.clone(),
            result: result_rel(&cells[c], r),
        });
    }
    write_atomic(
        &opts.out_dir.join(Manifest::FILE),
        serde_json::to_string_pretty(&manifest)?.as_bytes(),
    )?;
    crate::experiment::summary::summarize(&opts.out_dir)?;
    Ok(manifest)
}
