//! `tdosc` — scenario runner for the coupled time-dependent oscillator
//! toolkit.

mod config;
mod output;
mod runner;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::runner::{RunError, RunOptions};

#[derive(Parser)]
#[command(
    name = "tdosc",
    about = "Simulate two coupled oscillators with time-dependent masses and \
             verify the canonical frame transformations that eliminate them"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Directory for CSV and summary output (overrides the config key).
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,

    /// Suppress the summary on stdout (files are still written).
    #[arg(long, global = true)]
    quiet: bool,

    /// Reserved; all computation is deterministic.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate every requested pipeline and write trajectory CSVs.
    Simulate { config: PathBuf },
    /// Equivalence residuals and invariant checks only.
    Verify { config: PathBuf },
    /// Dilation-free frame discrepancy against the frozen-mass baseline.
    CompareMg { config: PathBuf },
    /// Cross-validate Gaussian moments against truncated Fock evolution.
    FockCheck { config: PathBuf },
    /// Single-oscillator naive mass-elimination demo (uses `m1`).
    SingleDemo { config: PathBuf },
}

fn load(path: &PathBuf) -> Result<config::ScenarioConfig, RunError> {
    let text = std::fs::read_to_string(path)?;
    Ok(config::parse_config(&text)?)
}

fn run(cli: &Cli) -> Result<(), RunError> {
    let path = match &cli.command {
        Command::Simulate { config }
        | Command::Verify { config }
        | Command::CompareMg { config }
        | Command::FockCheck { config }
        | Command::SingleDemo { config } => config,
    };
    let cfg = load(path)?;
    let opts = RunOptions {
        output_dir: cli
            .output_dir
            .clone()
            .or_else(|| cfg.output_dir.clone())
            .unwrap_or_else(|| PathBuf::from("out")),
        quiet: cli.quiet,
    };
    match &cli.command {
        Command::Simulate { .. } => runner::simulate(&cfg, &opts),
        Command::Verify { .. } => runner::verify(&cfg, &opts),
        Command::CompareMg { .. } => runner::compare_mg(&cfg, &opts),
        Command::FockCheck { .. } => runner::fock_check(&cfg, &opts),
        Command::SingleDemo { .. } => runner::single_demo(&cfg, &opts),
    }
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap defaults to exit code 2; usage errors are 1 here
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
