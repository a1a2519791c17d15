use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use frachedge_cli::{config::Overrides, ExperimentConfig};

/// Conditional-mean hedging experiments in the fractional Black-Scholes
/// model with proportional transaction costs.
#[derive(Parser)]
#[command(name = "frachedge", version, about)]
struct Cli {
    /// Experiment config file (TOML); built-in defaults when omitted
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Override the master seed
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Override the number of Monte Carlo paths
    #[arg(long, global = true)]
    paths: Option<usize>,

    /// Override the output prefix
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Override the output format (csv | json)
    #[arg(long, global = true)]
    format: Option<String>,

    /// Override the Hurst index
    #[arg(long, global = true)]
    hurst: Option<f64>,

    /// Override the proportional cost rate
    #[arg(long, global = true)]
    cost: Option<f64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a seeded hedging ensemble and write per-path and summary reports
    Hedge,
    /// Conditional-resimulation check of the tracking requirement
    VerifyTracking {
        /// Check a single trading step (default: all steps)
        #[arg(long)]
        step: Option<usize>,
        /// Conditional draws per step
        #[arg(long, default_value_t = 100_000)]
        n_conditional: usize,
    },
    /// Kernel self-tests: isometry identity, form discriminator,
    /// projection-oracle ladder, Brownian reduction
    VerifyKernels,
    /// Minimal-cost initial position and its boundedness determination
    InitialPosition,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();

    if let Ok(workers) = std::env::var("FRACHEDGE_WORKERS") {
        if let Ok(n) = workers.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }

    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let overrides = Overrides {
        seed: cli.seed,
        paths: cli.paths,
        out: cli.out,
        format: cli.format,
        hurst: cli.hurst,
        cost: cli.cost,
    };
    let cfg = ExperimentConfig::load(cli.config.as_deref(), &overrides)?;
    let out_prefix = PathBuf::from(&cfg.output.path);

    let report = match &cli.command {
        Command::Hedge => frachedge_cli::run_experiment(&cfg)?,
        Command::VerifyTracking {
            step,
            n_conditional,
        } => frachedge_cli::verify_tracking(&cfg, *step, *n_conditional)?,
        Command::VerifyKernels => frachedge_cli::verify_kernels(&cfg)?,
        Command::InitialPosition => frachedge_cli::initial_position(&cfg)?,
    };
    let written = report.write(&out_prefix)?;
    for path in &written {
        println!("wrote {}", path.display());
    }
    if !report.diagnostics.engine_errors.is_empty() {
        eprintln!(
            "{} path(s) failed; see diagnostics",
            report.diagnostics.engine_errors.len()
        );
    }
    Ok(())
}
