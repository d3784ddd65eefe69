use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use reluphase_cli::config::ExperimentConfig;
use reluphase_cli::experiments;
use reluphase_cli::schema::validate_dir;

#[derive(Parser)]
#[command(name = "reluphase", version, about = "Gradient descent experiments for two-layer ReLU classifiers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// JSON config file; omitted fields take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (overrides `output_dir`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Base seed; run r uses seed + r.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    runs: Option<usize>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Single training run with trajectory, phase and audit outputs.
    Train(Common),
    /// Iterations to convergence versus subspace angle.
    SweepAngle(Common),
    /// Iterations to convergence versus width, random vs half-space init.
    SweepWidth(Common),
    /// Histogram of max_t |W^t| over runs.
    NormHist(Common),
    /// Closed-form vs Monte Carlo probability of the geometric condition.
    GcProb(Common),
    /// Weight dynamics frames from the fixed planar start.
    TraceDynamics(Common),
    /// Constructed minima, critical-point audits and the Lipschitz diagnostic.
    LandscapeAudit(Common),
    /// Check every file of an output directory against its schema.
    Validate { dir: PathBuf },
}

fn prepare(c: &Common, command: &str) -> Result<(ExperimentConfig, PathBuf)> {
    let mut cfg = match &c.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = c.seed {
        cfg.seed_base = s;
    }
    if c.runs.is_some() {
        cfg.runs = c.runs;
    }
    cfg.validate()?;
    if let Some(n) = c.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the thread pool")?;
    }
    let out = c
        .out
        .clone()
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("results").join(command));
    Ok((cfg, out))
}

fn run(cli: Cli) -> Result<()> {
    let (name, common) = match &cli.command {
        Command::Train(c) => ("train", c),
        Command::SweepAngle(c) => ("sweep-angle", c),
        Command::SweepWidth(c) => ("sweep-width", c),
        Command::NormHist(c) => ("norm-hist", c),
        Command::GcProb(c) => ("gc-prob", c),
        Command::TraceDynamics(c) => ("trace-dynamics", c),
        Command::LandscapeAudit(c) => ("landscape-audit", c),
        Command::Validate { dir } => {
            let n = validate_dir(dir)?;
            println!("{}: {n} files valid", dir.display());
            return Ok(());
        }
    };
    let (cfg, out) = prepare(common, name)?;
    match &cli.command {
        Command::Train(_) => {
            let o = experiments::cmd_train(&cfg, &out)?;
            println!(
                "stop: {:?} at t = {}, final loss {:e}",
                o.record.stop_reason, o.record.final_t, o.record.final_loss
            );
        }
        Command::SweepAngle(_) => {
            for c in experiments::cmd_sweep_angle(&cfg, &out)? {
                println!(
                    "theta = {:.4}: {}/{} converged, mean {:?}",
                    c.theta.unwrap_or(f64::NAN),
                    c.converged(),
                    c.runs.len(),
                    c.mean()
                );
            }
        }
        Command::SweepWidth(_) => {
            for c in experiments::cmd_sweep_width(&cfg, &out)? {
                println!(
                    "2k = {} {}: {}/{} converged, mean {:?}",
                    c.width,
                    c.init.name(),
                    c.converged(),
                    c.runs.len(),
                    c.mean()
                );
            }
        }
        Command::NormHist(_) => {
            let h = experiments::cmd_norm_hist(&cfg, &out)?;
            println!("{} runs binned into {} bins", h.runs.len(), h.bins.len());
        }
        Command::GcProb(_) => {
            for r in experiments::cmd_gc_prob(&cfg, &out)? {
                println!("d = {}, k = {}: closed form {} vs MC {}", r.d, r.k, r.closed_form, r.mc.estimate);
            }
        }
        Command::TraceDynamics(_) => {
            let t = experiments::cmd_trace_dynamics(&cfg, &out)?;
            println!("{} frames, final t = {}", t.frames.len(), t.final_t);
        }
        Command::LandscapeAudit(_) => {
            let r = experiments::cmd_landscape_audit(&cfg, &out)?;
            println!(
                "{} / {} audited runs at a global minimum; Lipschitz max ratio {}",
                r.audits.global_min, r.audits.runs, r.lipschitz.max_ratio
            );
        }
        Command::Validate { .. } => unreachable!(),
    }
    println!("outputs in {}", out.display());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
