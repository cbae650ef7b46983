//! `qpin`: reproducible runs of the quantile-pinning checks.
//!
//! Exit codes: 0 success, 1 tolerance exceeded, 2 usage or configuration
//! error, 3 numeric failure.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::commands::{
    CounterexampleArgs, DenyArgs, KernelArgs, MstarArgs, PstarArgs, Run, VerifyArgs,
};
use crate::output::{emit, Format};

#[derive(Debug, Parser)]
#[command(
    name = "qpin",
    version,
    about = "Quantile pinning of Gaussian and gamma exponential families"
)]
struct Cli {
    /// Report format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,

    /// Write the report here instead of standard output.
    #[arg(long, global = true)]
    output: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Gamma shape p* solving E_p(a) = alpha.
    Pstar(PstarArgs),
    /// Gaussian mean m* = b - Φ⁻¹(alpha).
    Mstar(MstarArgs),
    /// Pinning residuals of a location or scale family over a tilt grid.
    Verify(VerifyArgs),
    /// Closed-form vs quadrature transform of a kernel, with its roots.
    Kernel(KernelArgs),
    /// Iterate a convolution operator and project onto its fixed points.
    Deny(DenyArgs),
    /// Pinning defect of the excluded mixture solutions.
    Counterexample(CounterexampleArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Pstar(a) => a.run(cli.format),
        Command::Mstar(a) => a.run(cli.format),
        Command::Verify(a) => a.run(cli.format),
        Command::Kernel(a) => a.run(cli.format),
        Command::Deny(a) => a.run(cli.format),
        Command::Counterexample(a) => a.run(cli.format),
    };
    match result {
        Ok(Run {
            bytes,
            within_tolerance,
            numeric_failure,
        }) => {
            if let Err(e) = emit(&bytes, cli.output.as_deref()) {
                eprintln!("error: cannot write report: {e}");
                return ExitCode::from(2);
            }
            if let Some(msg) = numeric_failure {
                eprintln!("error: numeric failure: {msg}");
                ExitCode::from(3)
            } else if within_tolerance {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
