use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use evidence::analysis::{
    self, collect_states, network_fixed_points, pca, r2_over_time, CollectAt, FixedPointConfig, DECODE_TRIALS,
};
use evidence::experiment::svg::{LinePlot, Series};
use evidence::experiment::{run_experiment, summarize, verify_theory, ExperimentId, ExperimentSpec, RunOptions};
use evidence::tasks::format::write_batch;
use evidence::train::{evaluate_all, train, TrainConfig, TrainedNet};

#[derive(Parser)]
#[command(name = "evidence", version, about = "Multi-task evidence accumulation networks")]
struct Cli {
    /// Log level filter (error, warn, info, debug).
    #[arg(long, global = true, default_value = "info")]
    log: String,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    FixedRt,
    FreeRt,
    Context,
}

#[derive(Subcommand)]
enum Command {
    /// Train one network and write its checkpoint and report.
    Train {
        /// TOML or JSON config; defaults to the preset.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "fixed-rt")]
        preset: Preset,
        #[arg(long)]
        seed: Option<u64>,
        /// Override the number of training batches.
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long, default_value = "out/train")]
        out: PathBuf,
    },
    /// Decode latents from a trained network's hidden states.
    Eval {
        checkpoint: PathBuf,
        /// Noise level of the decoding trials.
        #[arg(long, default_value_t = 0.2)]
        sigma: f64,
        #[arg(long, default_value_t = 5)]
        repeats: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also decode after every step.
        #[arg(long)]
        over_time: bool,
        /// Write one decoding batch in the binary trial format.
        #[arg(long)]
        dump_batch: Option<PathBuf>,
        #[arg(long, default_value = "out/eval")]
        out: PathBuf,
    },
    /// Search for fixed points of a trained network with no input.
    Fixedpoints {
        checkpoint: PathBuf,
        #[arg(long, default_value_t = 256)]
        seeds: usize,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        #[arg(long, default_value_t = 0.01)]
        lr: f64,
        #[arg(long, default_value_t = 5000)]
        max_iter: usize,
        #[arg(long, default_value_t = 0.05)]
        dedup_radius: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "out/fixedpoints")]
        out: PathBuf,
    },
    /// Run a catalog experiment (E1..E11).
    Sweep {
        id: String,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        workers: usize,
        /// Root seed; network r of a cell uses seed + r.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Five networks per cell for sweeps that default to fewer.
        #[arg(long)]
        full: bool,
        #[arg(long)]
        repeats: Option<usize>,
        /// Override the number of training batches (for quick runs).
        #[arg(long)]
        steps: Option<usize>,
        /// Checkpoint cache shared between sweeps.
        #[arg(long)]
        cache: Option<PathBuf>,
        /// Retrain networks whose results already exist.
        #[arg(long)]
        no_resume: bool,
        /// Print the resolved experiment spec and exit.
        #[arg(long)]
        dry_run: bool,
    },
    /// Rebuild tables and plots of a sweep directory.
    Summarize { dir: PathBuf },
    /// Check the closed-form results numerically; no training.
    VerifyTheory {
        /// Also write the JSON verdict here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load_config(path: &Path) -> Result<TrainConfig> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let cfg = match path.extension().and_then(|e| e.to_str()) {
        Some("json") => TrainConfig::from_json(&text)?,
        _ => TrainConfig::from_toml(&text)?,
    };
    Ok(cfg)
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, serde_json::to_string_pretty(value)?).with_context(|| format!("writing {}", path.display()))
}

fn cmd_train(config: Option<PathBuf>, preset: Preset, seed: Option<u64>, steps: Option<usize>, out: PathBuf) -> Result<bool> {
    let mut cfg = match (&config, preset) {
        (Some(p), _) => load_config(p)?,
        (None, Preset::FixedRt) => TrainConfig::default(),
        (None, Preset::FreeRt) => TrainConfig::free_rt(),
        (None, Preset::Context) => TrainConfig::context_dependent(),
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(n) = steps {
        cfg.n_batches = n;
    }
    fs::create_dir_all(&out)?;
    let (net, mut report) = train(&cfg)?;
    let ck = out.join("net.evck");
    net.save(&ck, cfg.n_batches as u64)?;
    report.checkpoint_path = Some(ck.display().to_string());
    write_json(&out.join("train_report.json"), &report)?;
    println!(
        "trained {} batches in {:.1} s: loss {:.5} -> {:.5}, mean accuracy {:.4}",
        cfg.n_batches,
        report.wall_clock_s,
        report.initial_loss,
        report.loss_curve.last().map_or(f64::NAN, |l| l.1),
        report.mean_accuracy
    );
    println!("checkpoint {}", ck.display());
    Ok(true)
}

#[allow(clippy::too_many_arguments)]
fn cmd_eval(
    checkpoint: PathBuf,
    sigma: f64,
    repeats: usize,
    seed: u64,
    over_time: bool,
    dump_batch: Option<PathBuf>,
    out: PathBuf,
) -> Result<bool> {
    let net = TrainedNet::load(&checkpoint)?;
    let accuracy = evaluate_all(&net, 1000, seed)?;
    let report = analysis::decode_network(&net, 0, sigma, repeats, seed)?;
    write_json(&out.join("decode_report.json"), &report)?;
    write_json(&out.join("accuracy.json"), &accuracy)?;
    println!(
        "accuracy {:.4}  OOD r2 {:.3} [{:.3}, {:.3}]  ID r2 {:.3} [{:.3}, {:.3}]",
        accuracy.iter().sum::<f64>() / accuracy.len() as f64,
        report.ood.p50,
        report.ood.p25,
        report.ood.p75,
        report.id.p50,
        report.id.p25,
        report.id.p75
    );
    if over_time {
        let mut n = net.clone();
        n.config.sigma = sigma;
        let curve = r2_over_time(&n, DECODE_TRIALS, repeats, seed)?;
        for p in &curve {
            println!("t {:>3}  OOD {:.3}  ID {:.3}  theory {:.3}", p.t, p.ood.p50, p.id.p50, p.theory);
        }
        write_json(&out.join("r2_over_time.json"), &curve)?;
    }
    if let Some(path) = dump_batch {
        let batch = net.batch(0, sigma, 256, seed)?;
        let mut f = std::io::BufWriter::new(fs::File::create(&path)?);
        write_batch(&mut f, &batch)?;
        println!("batch written to {}", path.display());
    }
    Ok(true)
}

#[allow(clippy::too_many_arguments)]
fn cmd_fixedpoints(
    checkpoint: PathBuf,
    seeds: usize,
    tol: f64,
    lr: f64,
    max_iter: usize,
    dedup_radius: f64,
    seed: u64,
    out: PathBuf,
) -> Result<bool> {
    let net = TrainedNet::load(&checkpoint)?;
    let cfg = FixedPointConfig {
        lr,
        max_iter,
        tol,
        dedup_radius,
    };
    let set = network_fixed_points(&net, seeds, &cfg, seed)?;
    write_json(&out.join("fixed_points.json"), &set)?;
    println!(
        "{} of {} seeds converged below {:e}; {} distinct fixed points",
        set.n_converged,
        set.n_seeds,
        tol,
        set.len()
    );
    let traj = collect_states(&net, 0, 0.0, 64, CollectAt::AllSteps, seed)?;
    let (t, m, n) = traj.states.dim();
    let flat = traj.states.to_shape((t * m, n))?.to_owned();
    let p = pca(flat.view())?;
    println!("trajectory PCA: top 3 components explain {:.3}", p.cumulative(3));
    let mut series = vec![Series {
        name: "states".into(),
        points: p.project(flat.view(), 2).rows().into_iter().map(|r| (r[0], r[1])).collect(),
        scatter: true,
        ..Default::default()
    }];
    if !set.is_empty() {
        let fp = p.project(set.points.view(), 2);
        series.push(Series {
            name: "fixed points".into(),
            points: fp.rows().into_iter().map(|r| (r[0], r[1])).collect(),
            scatter: true,
            ..Default::default()
        });
        if set.len() >= 3 {
            println!("fixed points: top 2 components explain {:.3}", pca(set.points.view())?.cumulative(2));
        }
    }
    let plot = LinePlot {
        title: "noiseless trajectories and fixed points (PC 1-2)".into(),
        x_label: "PC 1".into(),
        y_label: "PC 2".into(),
        series,
        log_x: false,
    };
    fs::write(out.join("fixed_points.svg"), plot.render())?;
    Ok(true)
}

#[allow(clippy::too_many_arguments)]
fn cmd_sweep(
    id: String,
    out: Option<PathBuf>,
    workers: usize,
    seed: u64,
    full: bool,
    repeats: Option<usize>,
    steps: Option<usize>,
    cache: Option<PathBuf>,
    no_resume: bool,
    dry_run: bool,
) -> Result<bool> {
    let id: ExperimentId = id.parse()?;
    let mut spec = ExperimentSpec::catalog(id, full);
    spec.base.seed = seed;
    if let Some(r) = repeats {
        spec.repeats = r;
    }
    if let Some(n) = steps {
        spec.base.n_batches = n;
    }
    spec.validate()?;
    if dry_run {
        println!("{}", serde_json::to_string_pretty(&spec)?);
        return Ok(true);
    }
    let out = out.unwrap_or_else(|| PathBuf::from(format!("out/{id}")));
    let opts = RunOptions {
        out_dir: out.clone(),
        workers,
        cache_dir: cache,
        resume: !no_resume,
    };
    println!(
        "{id}: {} ({} cells x {} networks)",
        id.title(),
        spec.cells().len(),
        spec.repeats
    );
    let manifest = run_experiment(&spec, &opts)?;
    let summary = summarize(&out)?;
    print_summary(&summary);
    if manifest.n_failed > 0 {
        eprintln!("{} networks failed; see {}", manifest.n_failed, out.join("manifest.json").display());
    }
    Ok(manifest.n_failed == 0)
}

fn print_summary(s: &evidence::experiment::Summary) {
    println!(
        "{:>4} {:>14} {:>3} {:>6} {:>6} {:>5} {:>6}  {:>6} {:>6} {:>6}  {:>6} {:>6}",
        "cell", "variant", "D", "N_task", "sigma", "rho", "nets", "ood25", "ood50", "ood75", "id50", "acc"
    );
    for c in &s.cells {
        let k = &c.cell;
        println!(
            "{:>4} {:>14} {:>3} {:>6} {:>6} {:>5} {:>3}/{:<2}  {:>6.3} {:>6.3} {:>6.3}  {:>6.3} {:>6.3}",
            k.index,
            k.variant.name(),
            k.d,
            k.n_tasks,
            k.sigma_train,
            k.rho,
            c.n_ok,
            c.n_nets,
            c.ood.p25,
            c.ood.p50,
            c.ood.p75,
            c.id.p50,
            c.mean_accuracy
        );
    }
    for p in &s.problems {
        eprintln!("problem: {p}");
    }
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Train {
            config,
            preset,
            seed,
            steps,
            out,
        } => cmd_train(config, preset, seed, steps, out),
        Command::Eval {
            checkpoint,
            sigma,
            repeats,
            seed,
            over_time,
            dump_batch,
            out,
        } => cmd_eval(checkpoint, sigma, repeats, seed, over_time, dump_batch, out),
        Command::Fixedpoints {
            checkpoint,
            seeds,
            tol,
            lr,
            max_iter,
            dedup_radius,
            seed,
            out,
        } => cmd_fixedpoints(checkpoint, seeds, tol, lr, max_iter, dedup_radius, seed, out),
        Command::Sweep {
            id,
            out,
            workers,
            seed,
            full,
            repeats,
            steps,
            cache,
            no_resume,
            dry_run,
        } => cmd_sweep(id, out, workers, seed, full, repeats, steps, cache, no_resume, dry_run),
        Command::Summarize { dir } => {
            if !dir.join("manifest.json").exists() {
                bail!("{} has no manifest.json", dir.display());
            }
            let s = summarize(&dir)?;
            print_summary(&s);
            Ok(s.problems.is_empty())
        }
        Command::VerifyTheory { out } => {
            let report = verify_theory()?;
            let text = serde_json::to_string_pretty(&report)?;
            println!("{text}");
            if let Some(p) = out {
                fs::write(&p, &text)?;
            }
            for c in report.checks.iter().filter(|c| !c.passed) {
                eprintln!("FAILED {}: {} (threshold {})", c.name, c.value, c.threshold);
            }
            Ok(report.passed)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::new().parse_filters(&cli.log).init();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
