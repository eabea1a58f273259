//! `naggs`: experiment runner for the NAG-GS laboratory.
//!
//! Every subcommand reads its table from an optional TOML config, computes
//! everything in memory and writes its files only after it succeeded.
//! Exit codes: 0 success, 1 numerical or I/O failure, 2 invalid config.

mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::Ctx;
use config::ExperimentConfig;
use error::Result;
use output::{Format, Output};

const DEFAULT_SEED: u64 = 0;
const DEFAULT_OUT: &str = "naggs-out";

#[derive(Parser)]
#[command(name = "naggs", version, about = "NAG-GS optimizer experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// TOML experiment config.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Master seed; overrides the config.
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,

    /// Output directory; overrides the config.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Table format; overrides the config.
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,

    /// Worker threads (all cores when absent).
    #[arg(long, global = true, value_name = "N")]
    jobs: Option<usize>,

    /// Only errors and warnings on stderr, nothing on stdout.
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Spectral radius, optimal and critical step sizes, stationary covariance.
    Analyze,
    /// Noisy ensembles on a random quadratic.
    Simulate,
    /// Convergence of ensembles to the Gibbs density of a scalar objective.
    Stationary,
    /// Learning-rate grids for logistic regression.
    Train,
    /// Extreme Hessian eigenvalues along training or at given parameters.
    Spectrum,
    /// Random search over (alpha, gamma, mu).
    Sweep,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Analyze => "analyze",
            Command::Simulate => "simulate",
            Command::Stationary => "stationary",
            Command::Train => "train",
            Command::Spectrum => "spectrum",
            Command::Sweep => "sweep",
        }
    }
}

fn execute(cfg: &ExperimentConfig, command: Command, ctx: &Ctx) -> Result<(Output, serde_json::Value)> {
    fn run<T: Clone + Default + serde::Serialize>(
        section: &Option<T>,
        ctx: &Ctx,
        f: fn(&T, &Ctx) -> Result<Output>,
    ) -> Result<(Output, serde_json::Value)> {
        let section = section.clone().unwrap_or_default();
        Ok((f(&section, ctx)?, serde_json::to_value(&section)?))
    }
    match command {
        Command::Analyze => run(&cfg.analyze, ctx, commands::analyze::run),
        Command::Simulate => run(&cfg.simulate, ctx, commands::simulate::run),
        Command::Stationary => run(&cfg.stationary, ctx, commands::stationary::run),
        Command::Train => run(&cfg.train, ctx, commands::train::run),
        Command::Spectrum => run(&cfg.spectrum, ctx, commands::spectrum::run),
        Command::Sweep => run(&cfg.sweep, ctx, commands::sweep::run),
    }
}

fn main_inner(cli: Cli) -> Result<()> {
    let cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if cli.jobs == Some(0) {
        return error::config_err("--jobs must be at least 1");
    }
    let ctx = Ctx {
        seed: cli.seed.or(cfg.seed).unwrap_or(DEFAULT_SEED),
        format: cli.format.or(cfg.format).unwrap_or_default(),
        quiet: cli.quiet,
    };
    let out_dir = cli.out.clone().or_else(|| cfg.output_dir.clone()).unwrap_or_else(|| DEFAULT_OUT.into());

    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.jobs {
        pool = pool.num_threads(n);
    }
    let (output, section) = pool.build()?.install(|| execute(&cfg, cli.command, &ctx))?;

    let meta = serde_json::json!({
        "command": cli.command.name(),
        "seed": ctx.seed,
        "format": ctx.format,
        "version": env!("CARGO_PKG_VERSION"),
        "config": section,
    });
    let written = output.write_all(&out_dir, &meta)?;
    if !ctx.quiet {
        for name in written {
            println!("{}", out_dir.join(name).display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match main_inner(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
