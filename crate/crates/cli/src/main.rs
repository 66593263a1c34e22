//! `realizer`: checks, reconstruction and verification of isotropic
//! conductivities realizing a divergence-free current field.

mod commands;
mod config;
mod error;
mod output;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::error::CliError;

/// Process exit codes. Each is a function of the report the command produced.
pub mod exit {
    /// Conditions hold, residuals within tolerance, or a positive verdict.
    pub const OK: u8 = 0;
    /// Numerical failure: residual at or above tolerance, more than 10% of
    /// grid points failed, or a flow could not be integrated.
    pub const FAILURE: u8 = 1;
    /// Frobenius condition fails, or a negative periodic or planar verdict.
    pub const NEGATIVE: u8 = 2;
    /// Frobenius holds but the orthogonal-basis condition fails.
    pub const BASIS: u8 = 3;
    /// Periodic or planar verdict inconclusive.
    pub const INCONCLUSIVE: u8 = 4;
    /// Invalid arguments, unreadable input, or an unsupported field.
    pub const USAGE: u8 = 64;
}

#[derive(Parser, Debug)]
#[command(name = "realizer", version, about = "Isotropic realizability of current fields")]
#[command(after_help = EXIT_HELP)]
struct Cli {
    /// Worker threads for grid work (default: available parallelism).
    #[arg(long, global = true, env = "REALIZER_THREADS", value_name = "N")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

const EXIT_HELP: &str = "Exit codes:
  0   success or positive verdict
  1   residual at or above tolerance, >10% failed points, or flow failure
  2   Frobenius condition fails, or a periodic/planar verdict is negative
  3   only the orthogonal-basis condition fails (realize refuses without --force)
  4   periodic/planar verdict inconclusive
  64  invalid arguments or input";

#[derive(Subcommand, Debug)]
enum Command {
    /// Divergence, Frobenius and orthogonal-basis conditions on a box.
    Check(commands::check::Args),
    /// Reconstruct w = ln σ on a grid and verify curl(σ⁻¹ j) = 0.
    Realize(commands::realize::Args),
    /// Verify a closed-form or user conductivity.
    Verify(commands::verify::Args),
    /// Boundedness scan and torus verdict of a periodic field.
    Periodic(commands::periodic::Args),
    /// Trajectory of one of the three flows.
    Trace(commands::trace::Args),
    /// Planar construction from a potential v(x, y).
    Planar(commands::planar::Args),
    /// List or show the built-in examples.
    Examples(commands::examples::Args),
}

fn run(cli: Cli) -> Result<u8, CliError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::usage("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::usage(format!("cannot size the worker pool: {e}")))?;
    }
    match cli.command {
        Command::Check(a) => commands::check::run(a),
        Command::Realize(a) => commands::realize::run(a),
        Command::Verify(a) => commands::verify::run(a),
        Command::Periodic(a) => commands::periodic::run(a),
        Command::Trace(a) => commands::trace::run(a),
        Command::Planar(a) => commands::planar::run(a),
        Command::Examples(a) => commands::examples::run(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { exit::USAGE } else { exit::OK };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code)
        }
    }
}
