//! Command-line front end for the `elane` binary.
//!
//! Every subcommand writes a single JSON object to the provided writer and,
//! when `--out` is given, its artifacts to that directory. Failures map to
//! fixed exit codes, see [`CliError::exit_code`].

mod common;
mod encode;
mod eval;
mod evolve;
mod gradcheck;
mod losscmp;

use std::io::{self, Write};
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use elane_core::Error;

pub use common::{parse_grid, random_fields};
pub use encode::EncodeArgs;
pub use eval::{EvalArgs, MetricMode};
pub use evolve::{simulate, EvolveArgs, ModeArg, RunArgs};
pub use gradcheck::{check, GradcheckArgs, GradcheckReport};
pub use losscmp::{compare, Locality, LosscmpArgs, LosscmpReport};

#[derive(Debug, Parser)]
#[command(
    name = "elane",
    version,
    about = "Elastic lane maps: encode, evolve, evaluate"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Encode an annotation file into per-lane ELM fields.
    Encode(EncodeArgs),
    /// Simulate a predicted lane moving towards the ground truth.
    Evolve(EvolveArgs),
    /// Score prediction annotations against ground truth annotations.
    Eval(EvalArgs),
    /// Check the transforms and the spectral gradient against oracles.
    Gradcheck(GradcheckArgs),
    /// Compare evolutions under the elastic energy and under MSE.
    Losscmp(LosscmpArgs),
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error(transparent)]
    Core(#[from] Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("checks failed")]
    CheckFailed,
}

impl CliError {
    /// 2 for malformed input or flags, 3 for lane capacity, 4 for divergence,
    /// 5 for failed checks, 1 for I/O errors.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::Core(Error::Capacity { .. }) => 3,
            CliError::Core(Error::Divergence { .. }) => 4,
            CliError::Core(_) => 2,
            CliError::Io { .. } => 1,
            CliError::CheckFailed => 5,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>) -> impl FnOnce(io::Error) -> CliError {
        let path = path.into();
        move |source| CliError::Io { path, source }
    }
}

pub type CliResult<T = ()> = Result<T, CliError>;

/// Runs one parsed command, writing its JSON report to `stdout`.
pub fn run(cli: Cli, stdout: &mut dyn Write) -> CliResult {
    match cli.command {
        Command::Encode(args) => encode::run(&args, stdout),
        Command::Evolve(args) => evolve::run(&args, stdout),
        Command::Eval(args) => eval::run(&args, stdout),
        Command::Gradcheck(args) => gradcheck::run(&args, stdout),
        Command::Losscmp(args) => losscmp::run(&args, stdout),
    }
}
