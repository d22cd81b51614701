use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use subag_cli::presets;
use subag_cli::{run, validate, ExperimentConfig, Mode, RunError, RunOptions};

/// Theory and simulation for subagged regularized M-estimators.
#[derive(Parser)]
#[command(name = "subag", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Deterministic limits for the configured cell or grid.
    Theory(RunArgs),
    /// Deterministic limits over a grid.
    Sweep(RunArgs),
    /// Monte Carlo risk of fitted ensembles.
    Simulate(RunArgs),
    /// Monte Carlo risk with the data-driven risk estimate.
    Estimate(RunArgs),
    /// Deterministic limits next to Monte Carlo risk.
    Compare(RunArgs),
    /// Run a built-in protocol in its own mode.
    Preset {
        /// One of effect-of-m, optimal-subsample, lambda-c-heatmap, huber-heatmap.
        name: String,
        /// Print the preset config instead of running it.
        #[arg(long)]
        print: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Print diagnostics for a config as JSON.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    /// TOML config, or a manifest.json from an earlier run.
    #[arg(long)]
    config: PathBuf,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// Output directory (overrides `output`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; defaults to the number of cores.
    #[arg(long)]
    workers: Option<usize>,
    /// Base seed (overrides `base_seed`).
    #[arg(long)]
    seed: Option<u64>,
    /// Replications per cell (overrides `replications`).
    #[arg(long)]
    replications: Option<usize>,
}

impl Common {
    fn options(&self, mode: Option<Mode>) -> RunOptions {
        RunOptions { mode, out: self.out.clone(), workers: self.workers, seed: self.seed, replications: self.replications }
    }
}

fn execute(cfg: ExperimentConfig, opts: RunOptions) -> Result<(), RunError> {
    let manifest = run(&cfg, &opts)?;
    for d in &manifest.diagnostics {
        eprintln!("warning: {}: {}", d.field, d.message);
    }
    eprintln!(
        "{} rows ({} with failures) in {:.2}s -> {}",
        manifest.rows,
        manifest.failed_rows,
        manifest.wall_time_secs,
        manifest.config.output.join("results.csv").display()
    );
    Ok(())
}

fn dispatch(cli: Cli) -> Result<(), RunError> {
    let (mode, args) = match cli.command {
        Command::Theory(a) => (Mode::Theory, a),
        Command::Sweep(a) => (Mode::Sweep, a),
        Command::Simulate(a) => (Mode::Simulate, a),
        Command::Estimate(a) => (Mode::Estimate, a),
        Command::Compare(a) => (Mode::Compare, a),
        Command::Preset { name, print, common } => {
            if print {
                print!("{}", presets::source(&name).ok_or_else(|| presets::preset(&name).unwrap_err())?);
                return Ok(());
            }
            return execute(presets::preset(&name)?, common.options(None));
        }
        Command::Validate { config } => {
            let cfg = ExperimentConfig::load(&config)?;
            let diags = validate(&cfg);
            println!("{}", serde_json::to_string_pretty(&diags).map_err(|e| RunError::Io(e.to_string()))?);
            return if diags.iter().any(|d| d.is_error()) { Err(RunError::Invalid(diags)) } else { Ok(()) };
        }
    };
    execute(ExperimentConfig::load(&args.config)?, args.common.options(Some(mode)))
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.report());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
