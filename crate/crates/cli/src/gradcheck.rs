use std::io::Write;

use clap::Args;
use elane_core::energy::EieOperator;
use elane_core::verify::{
    corrupted_kernel, dft_oracle_check, gradient_check, GradientReport, OracleReport, FD_STEP,
};
use elane_core::GridShape;
use serde::Serialize;

use crate::common::{emit, parse_grid, random_fields};
use crate::{CliError, CliResult};

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Grid for the direct-summation transform oracle.
    #[arg(long, default_value = "8x8", value_parser = parse_grid)]
    pub oracle_grid: GridShape,
    #[arg(long, default_value_t = 100)]
    pub oracle_fields: usize,
    /// Grid for the finite-difference gradient check.
    #[arg(long, default_value = "16x16", value_parser = parse_grid)]
    pub fd_grid: GridShape,
    /// Number of seeds for the finite-difference check, one field each.
    #[arg(long, default_value_t = 20)]
    pub fd_seeds: usize,
    /// Replace the frequency kernel with a wrong one (negative control).
    #[arg(long, hide = true)]
    pub corrupt_kernel: bool,
}

#[derive(Debug, Serialize)]
pub struct GradcheckReport {
    pub seed: u64,
    pub oracle: OracleReport,
    pub gradient: GradientReport,
    pub passed: bool,
}

pub fn check(args: &GradcheckArgs) -> CliResult<GradcheckReport> {
    if args.oracle_fields == 0 || args.fd_seeds == 0 {
        return Err(CliError::Input("field counts must be at least 1".into()));
    }
    let oracle = dft_oracle_check(&random_fields(
        args.seed,
        args.oracle_grid,
        args.oracle_fields,
    ))?;

    let fields: Vec<_> = (0..args.fd_seeds as u64)
        .flat_map(|i| random_fields(args.seed.wrapping_add(i), args.fd_grid, 1))
        .collect();
    let op = if args.corrupt_kernel {
        EieOperator::with_kernel(corrupted_kernel(args.fd_grid))
    } else {
        EieOperator::new(args.fd_grid)
    };
    let gradient = gradient_check(&op, &fields, FD_STEP)?;
    let passed = oracle.passed() && gradient.passed();
    Ok(GradcheckReport {
        seed: args.seed,
        oracle,
        gradient,
        passed,
    })
}

pub(crate) fn run(args: &GradcheckArgs, stdout: &mut dyn Write) -> CliResult {
    let report = check(args)?;
    emit(stdout, &report)?;
    if report.passed {
        Ok(())
    } else {
        Err(CliError::CheckFailed)
    }
}
