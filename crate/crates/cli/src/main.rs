//! `hebb`: run adaptation scenarios, parameter sweeps, the invariant checks
//! and memory snapshot inspection.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

const PRECEDENCE: &str = "\
Settings are resolved in this order, highest first:
  1. command-line flags
  2. the HEBB_OUT_DIR environment variable (output directory only)
  3. values in the TOML config file
  4. the built-in preset of the scenario kind";

#[derive(Debug, Parser)]
#[command(name = "hebb", version, about, after_long_help = PRECEDENCE)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a scenario for one or more methods and write per-seed CSV results.
    #[command(after_long_help = PRECEDENCE)]
    Run(RunArgs),
    /// Evaluate a scenario over a two-parameter grid of adaptation settings.
    #[command(after_long_help = PRECEDENCE)]
    Sweep(SweepArgs),
    /// Check the numerical invariants of the adaptation rules.
    Verify(VerifyArgs),
    /// Print statistics of an episodic memory snapshot.
    InspectMemory(InspectArgs),
}

#[derive(Debug, Args)]
pub struct ScenarioArgs {
    /// TOML config file; omitted fields take the preset of the scenario kind.
    pub config: Option<PathBuf>,
    /// Scenario preset when no config file is given, or to override its kind.
    #[arg(long, value_parser = ["continual", "incremental", "online"])]
    pub kind: Option<String>,
    /// Seed to run; repeat for several.
    #[arg(long = "seed")]
    pub seeds: Vec<u64>,
    /// Output directory.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Base name of the output files.
    #[arg(long)]
    pub name: Option<String>,
    /// Neighbors retrieved per query.
    #[arg(long)]
    pub k: Option<usize>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    /// Method to run; repeat for several. One of parametric, mixture, mbpa,
    /// hebb, hebb-v1, hebb-v2 or hebb-v3:<weight>.
    #[arg(long = "method")]
    pub methods: Vec<String>,
    #[arg(long)]
    pub eta: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub steps: Option<usize>,
    /// Write the final memory of every seed as a snapshot into this directory.
    #[arg(long)]
    pub save_memory: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    /// Method to evaluate at each grid point.
    #[arg(long = "method", default_value = "hebb")]
    pub method: String,
    /// Comma-separated η values (with --beta).
    #[arg(long, value_delimiter = ',')]
    pub eta: Vec<f64>,
    /// Comma-separated β values (with --eta).
    #[arg(long, value_delimiter = ',')]
    pub beta: Vec<f64>,
    /// Comma-separated λ values (with --steps).
    #[arg(long, value_delimiter = ',')]
    pub lambda: Vec<f64>,
    /// Comma-separated step counts (with --lambda).
    #[arg(long, value_delimiter = ',')]
    pub steps: Vec<usize>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Seed of the random instances.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Deliberately corrupt the analytic gradient (checks that failures surface).
    #[arg(long, hide = true)]
    pub corrupt_gradient: bool,
}

#[derive(Debug, Args)]
pub struct InspectArgs {
    /// Snapshot file written by `run --save-memory`.
    pub path: PathBuf,
    /// Decay used to report the per-class dynamic weight.
    #[arg(long, default_value_t = 0.9)]
    pub beta: f64,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => commands::run(args),
        Command::Sweep(args) => commands::sweep(args),
        Command::Verify(args) => commands::verify(args),
        Command::InspectMemory(args) => commands::inspect_memory(args),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
