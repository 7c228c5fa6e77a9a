use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;

#[derive(Parser)]
#[command(
    name = "collapsim",
    version,
    about = "Double-slit electron with a monitored phonon mode"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the trajectory ensemble; writes records.csv, summary.txt, config.txt
    Simulate(Common),
    /// Unmonitored screen densities per phonon sector; writes pattern.csv
    Pattern(Common),
    /// Recompute summary.txt from an existing records file
    Analyze {
        #[command(flatten)]
        common: Common,
        /// Records file (default: <out>/records.csv)
        #[arg(long)]
        records: Option<PathBuf>,
    },
    /// Superposition defect of the mean-field map; writes defect.txt
    Defect(Common),
    /// Mach-Zehnder outcome probabilities and sampled counts
    Mzi(Common),
}

#[derive(Args, Clone)]
pub struct Common {
    /// Configuration file (flat `key = value` lines)
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Master seed; overrides COLLAPSIM_SEED and the config file
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: available parallelism)
    #[arg(long)]
    workers: Option<usize>,
    /// Configuration override `key=value`, applied after the file
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Simulate(c) => commands::simulate(c),
        Command::Pattern(c) => commands::pattern(c),
        Command::Analyze { common, records } => commands::analyze(common, records.as_deref()),
        Command::Defect(c) => commands::defect(c),
        Command::Mzi(c) => commands::mzi(c),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {}", failure.message);
            ExitCode::from(failure.code)
        }
    }
}
