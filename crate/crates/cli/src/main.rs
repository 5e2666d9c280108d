use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod config;
mod error;
mod run;

use config::RunConfig;
use error::CliError;

/// Simulate colored geometric random graphs and estimate their
/// rate-distortion behaviour.
#[derive(Debug, Parser)]
#[command(name = "cgrg", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML run config, or a manifest.json from an earlier run.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override the model seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Cap on worker threads. Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Override the output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// Sample one graph and write it with its type pair.
    Generate,
    /// Local-view statistics and Poisson goodness of fit for one graph.
    Stats,
    /// Distance of the empirical view law to the limit law along an n ladder.
    SllnCheck,
    /// Empirical and single-letter cumulants on a t grid.
    Cumulant,
    /// Rate-distortion curve on an alpha grid.
    RdCurve,
    /// Monte Carlo distortion-ball exponent.
    BallExponent,
    /// Fit the two-class sensor model to node and link tables.
    WsnFit,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Generate => "generate",
            Command::Stats => "stats",
            Command::SllnCheck => "slln-check",
            Command::Cumulant => "cumulant",
            Command::RdCurve => "rd-curve",
            Command::BallExponent => "ball-exponent",
            Command::WsnFit => "wsn-fit",
        }
    }
}

fn execute(cli: &Cli) -> Result<(), CliError> {
    let path = cli.config.as_ref().ok_or_else(|| CliError::Config("--config is required".into()))?;
    let mut cfg = RunConfig::load(path)?;
    if cfg.experiment.name() != cli.command.name() {
        return Err(CliError::Config(format!(
            "config describes a {} run, not {}",
            cfg.experiment.name(),
            cli.command.name()
        )));
    }
    if let Some(seed) = cli.seed {
        cfg.model.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.output.dir = out.clone();
    }
    if let Some(k) = cli.threads {
        if k == 0 {
            return Err(CliError::Config("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build_global()
            .map_err(|e| CliError::Config(e.to_string()))?;
    }
    let files = run::run(&cfg)?;
    log::info!("wrote {} files to {}", files.len(), cfg.output.dir.display());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("cgrg: {e}");
            e.exit_code()
        }
    }
}
