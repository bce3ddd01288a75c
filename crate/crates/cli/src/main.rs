use std::process::ExitCode;

use clap::{Parser, Subcommand};
use czsob_cli::commands::{self, CarlesonArgs, KeylemmaArgs, TransformArgs, VerifyArgs, WhitneyArgs};
use czsob_cli::CliError;

/// Whitney coverings, truncated Calderón–Zygmund transforms and Carleson
/// checks on Lipschitz domains.
#[derive(Parser)]
#[command(name = "czsob", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build or load a covering and check its axioms.
    Whitney(WhitneyArgs),
    /// Evaluate a transform of a polynomial at points.
    Transform(TransformArgs),
    /// Shadow-condition constants across depths.
    Carleson(CarlesonArgs),
    /// Depth probe of the cube sum against Sobolev norms.
    Keylemma(KeylemmaArgs),
    /// Run the invariant suite.
    Verify(VerifyArgs),
}

const THREADS_VAR: &str = "CZSOB_THREADS";

fn threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var(THREADS_VAR) else { return Ok(()) };
    let n: usize = v.parse().map_err(|_| CliError::Config(format!("{THREADS_VAR}: expected a thread count, got `{v}`")))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(CliError::run)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let run = threads().and_then(|_| match &cli.command {
        Command::Whitney(a) => commands::whitney(a),
        Command::Transform(a) => commands::transform(a),
        Command::Carleson(a) => commands::carleson(a),
        Command::Keylemma(a) => commands::keylemma(a),
        Command::Verify(a) => commands::verify(a),
    });
    match run {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("czsob: some invariants failed; see the report");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("czsob: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
