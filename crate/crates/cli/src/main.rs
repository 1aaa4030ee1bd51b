use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use photon_bounds_cli::commands::{
    cmd_demo, cmd_estimate, cmd_simulate_qkd, cmd_simulate_tcspc, Figure, Method, RunConfig,
};
use photon_bounds_cli::config::Config;
use photon_bounds_cli::Result;

/// Certified photon-number statistics of optical channels.
#[derive(Debug, Parser)]
#[command(name = "photon-bounds", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Run configuration (`section.key = value` lines).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,

    /// Seed of the finite-shot sampler.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Replace exact statistics by frequencies of this many shots.
    #[arg(long, global = true)]
    shots: Option<u64>,

    /// Estimation method: analytical, lp or both.
    #[arg(long, global = true)]
    method: Option<String>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Intervals on q(m|n) from a measurement table.
    Estimate {
        /// Measurement table (CSV).
        #[arg(long)]
        table: Option<PathBuf>,
    },
    /// Key rates over a loss sweep.
    SimulateQkd,
    /// Time-resolved photon statistics of a fluorescence scene.
    SimulateTcspc,
    /// Canned runs: fig2 (key rate vs loss), fig3 (single-photon error bound vs loss), fig5 (time-resolved statistics).
    Demo { figure: String },
}

fn run(cli: Cli) -> Result<Vec<PathBuf>> {
    let mut config = match &cli.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    if let Some(m) = &cli.method {
        m.parse::<Method>()?;
        config.set("estimator.method", m.as_str());
    }
    if let Some(s) = cli.seed {
        config.set("run.seed", s.to_string());
    }
    if let Some(s) = cli.shots {
        config.set("run.shots", s.to_string());
    }
    let run = RunConfig::new(config, cli.out);
    match cli.command {
        Command::Estimate { table } => cmd_estimate(&run, table.as_deref()),
        Command::SimulateQkd => cmd_simulate_qkd(&run),
        Command::SimulateTcspc => cmd_simulate_tcspc(&run),
        Command::Demo { figure } => cmd_demo(&run, figure.parse::<Figure>()?),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
