//! `moprox solve | bench | check --config <path> [--out <dir>]`
//!
//! Exit codes: 0 critical point reached (or the working-precision limit),
//! 2 iteration cap, 3 solver failure, 1 failed checks, 64 bad configuration,
//! 74 output error.

mod commands;
mod config;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "moprox",
    version,
    about = "Multiobjective proximal Newton solver"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one solve and write its trace and report.
    Solve(Common),
    /// Run NPGMO and PGMO over a seed and condition sweep.
    Bench(Common),
    /// Run the named convergence checks.
    Check(Common),
}

#[derive(Args, Clone)]
pub struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Output directory, created if missing.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Replaces the instance seed, the start seed and the seed sweep.
    #[arg(long)]
    seed_override: Option<u64>,
    /// Worker threads for sweeps; defaults to all cores.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Io(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Config(m) => write!(f, "config error: {m}"),
            Self::Io(m) => write!(f, "output error: {m}"),
        }
    }
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            Self::Config(_) => 64,
            Self::Io(_) => 74,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Solve(c) => commands::solve(c),
        Command::Bench(c) => commands::bench(c),
        Command::Check(c) => commands::check(c),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("moprox: {e}");
            ExitCode::from(e.code())
        }
    }
}
