//! `sil`: batch runs of the index computations and the orbit-count verifier.
//!
//! Exit codes: 0 pass, 2 bad input, 3 numerical or internal failure,
//! 4 inconclusive verdict.

mod commands;
mod config;
mod report;

use std::process::ExitCode;
use std::time::Instant;

use anyhow::Result;
use clap::{Parser, Subcommand};
use sil_core::SilError;

use commands::Status;
use config::CommonArgs;

/// Malformed or inconsistent user input.
#[derive(Debug)]
pub struct InputError(pub String);

impl std::fmt::Display for InputError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for InputError {}

#[derive(Parser)]
#[command(name = "sil", version, about = "Maslov-type indices and closed characteristics of convex hypersurfaces")]
struct Cli {
    #[command(flatten)]
    common: CommonArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// ω-index, nullity and crossings of a system's fundamental solution.
    Index(commands::IndexArgs),
    /// Splitting numbers at the unit-circle eigenvalues of the end matrix.
    Splitting(commands::SplittingArgs),
    /// Mean index by quadrature and by the iterate limit.
    MeanIndex(commands::SystemArgs),
    /// Root-sum identity for splitting numbers on a random suite.
    BottCheck(commands::BottArgs),
    /// Closed characteristics of a body from a seed sweep.
    FindOrbits(commands::BodyArgs),
    /// The full count verification for a symmetric body.
    Verify(commands::BodyArgs),
    /// Common index jump certificates for the orbits of a body.
    JumpSearch(commands::JumpArgs),
}

pub fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<InputError>().is_some() || err.downcast_ref::<clap::Error>().is_some() {
        return 2;
    }
    match err.downcast_ref::<SilError>() {
        Some(e) if e.is_input() => 2,
        _ => 3,
    }
}

fn configure_threads() -> Result<()> {
    let Ok(value) = std::env::var("SIL_THREADS") else {
        return Ok(());
    };
    let threads: usize = value.trim().parse().map_err(|_| InputError(format!("SIL_THREADS must be a positive integer, got {value:?}")))?;
    if threads == 0 {
        return Err(InputError("SIL_THREADS must be positive".into()).into());
    }
    rayon::ThreadPoolBuilder::new().num_threads(threads).build_global()?;
    Ok(())
}

fn run(cli: &Cli) -> Result<Status> {
    configure_threads()?;
    let cfg = cli.common.resolve()?;
    let start = Instant::now();
    let (output, status) = match &cli.command {
        Command::Index(a) => commands::index(a, &cfg)?,
        Command::Splitting(a) => commands::splitting(a, &cfg)?,
        Command::MeanIndex(a) => commands::mean_index(a, &cfg)?,
        Command::BottCheck(a) => commands::bott_check(a, &cfg)?,
        Command::FindOrbits(a) => commands::find_orbits(a, &cfg)?,
        Command::Verify(a) => commands::verify(a, &cfg)?,
        Command::JumpSearch(a) => commands::jump_search(a, &cfg)?,
    };
    for path in output.emit(cli.common.out.as_deref(), start.elapsed())? {
        eprintln!("wrote {}", path.display());
    }
    Ok(status)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(Status::Pass) => ExitCode::SUCCESS,
        Ok(Status::Failed) => {
            eprintln!("error: a numerical check failed; see the report");
            ExitCode::from(3)
        }
        Ok(Status::Inconclusive) => {
            eprintln!("verdict inconclusive; see the diagnostics in the report");
            ExitCode::from(4)
        }
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
