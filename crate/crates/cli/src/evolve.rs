use std::io::Write;
use std::path::PathBuf;

use clap::{Args, ValueEnum};
use elane_core::dataio::{write_field_pgm, write_report_json, write_trace_csv, EvolutionSummary};
use elane_core::elm::encode_lane;
use elane_core::energy::stable_step_bound;
use elane_core::evolve::{evolve_explicit, evolve_implicit};
use elane_core::{EvolutionConfig, EvolutionMode, EvolutionTrace, LanePolyline};

use crate::common::{emit, ensure_dir, write_file, GridArgs};
use crate::CliResult;

/// Fraction of the stability bound used as the default implicit step.
pub const IMPLICIT_STEP_FRACTION: f64 = 0.9;
/// Default explicit step; one unit moves a sample by `α·v` pixels.
pub const EXPLICIT_DEFAULT_STEP: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Implicit,
    Explicit,
}

impl From<ModeArg> for EvolutionMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Implicit => EvolutionMode::Implicit,
            ModeArg::Explicit => EvolutionMode::Explicit,
        }
    }
}

/// Flags shared by the evolution-running subcommands.
#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// Ground-truth annotation file (first lane is used).
    #[arg(long)]
    pub gt: Option<PathBuf>,
    /// Column of the vertical ground-truth lane used without --gt
    /// [default: 0.4 of the grid width].
    #[arg(long)]
    pub gt_x: Option<f64>,
    /// Step size [default: 0.9 of the stability bound (implicit), 5 (explicit)].
    #[arg(long)]
    pub step: Option<f64>,
    #[arg(long, default_value_t = 2000)]
    pub max_steps: usize,
    /// Redistance the implicit field every N steps (0 = never).
    #[arg(long, default_value_t = 0)]
    pub reinit_every: usize,
    #[arg(long, default_value_t = 1)]
    pub record_every: usize,
    /// Stop when a step lowers the energy by less than this.
    #[arg(long, default_value_t = 1e-12)]
    pub stop_tol: f64,
    /// Do not clamp the implicit field to [-0.5, 0.5].
    #[arg(long)]
    pub no_clamp: bool,
    /// Directory for traces and summaries.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl RunArgs {
    pub fn gt_lane(&self, grid: &GridArgs) -> CliResult<LanePolyline> {
        match &self.gt {
            Some(path) => grid.load_first_lane(path),
            None => {
                let x = self.gt_x.unwrap_or(0.4 * grid.grid.width() as f64);
                Ok(LanePolyline::vertical(x, grid.grid.height()))
            }
        }
    }

    pub fn config(&self, grid: &GridArgs, mode: EvolutionMode) -> CliResult<EvolutionConfig> {
        let eie = grid.eie()?;
        let step_size = match (self.step, mode) {
            (Some(h), _) => h,
            (None, EvolutionMode::Implicit) => {
                IMPLICIT_STEP_FRACTION * stable_step_bound(grid.grid, eie)
            }
            (None, EvolutionMode::Explicit) => EXPLICIT_DEFAULT_STEP,
        };
        let cfg = EvolutionConfig {
            mode,
            step_size,
            max_steps: self.max_steps,
            eie,
            heaviside: grid.heaviside()?,
            clamp: !self.no_clamp,
            reinit_every: self.reinit_every,
            record_every: self.record_every,
            stop_tol: self.stop_tol,
            keep_snapshots: false,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
pub struct EvolveArgs {
    #[command(flatten)]
    pub grid: GridArgs,
    #[command(flatten)]
    pub run: RunArgs,
    /// Initial prediction annotation file (first lane) instead of --offset.
    #[arg(long)]
    pub init: Option<PathBuf>,
    /// Horizontal offset of the initial prediction from the ground truth.
    #[arg(long, default_value_t = -20.0, allow_negative_numbers = true, conflicts_with = "init")]
    pub offset: f64,
    #[arg(long, value_enum, default_value_t = ModeArg::Implicit)]
    pub mode: ModeArg,
    /// Also write the prediction field of every recorded step as PGM.
    #[arg(long)]
    pub snapshots: bool,
}

/// Runs the configured evolution; shared with the acceptance checks.
pub fn simulate(args: &EvolveArgs) -> CliResult<EvolutionTrace> {
    let mode = EvolutionMode::from(args.mode);
    let mut cfg = args.run.config(&args.grid, mode)?;
    cfg.keep_snapshots = args.snapshots;
    let shape = args.grid.grid;
    let gt = args.run.gt_lane(&args.grid)?;
    let init = match &args.init {
        Some(path) => args.grid.load_first_lane(path)?,
        None => gt.shifted(args.offset),
    };
    let trace = match mode {
        EvolutionMode::Implicit => {
            let (gt_field, mask) = encode_lane(&gt, shape, cfg.heaviside)?;
            let (psi, _) = encode_lane(&init, shape, cfg.heaviside)?;
            evolve_implicit(&psi, &gt_field, &mask, &cfg)?
        }
        EvolutionMode::Explicit => evolve_explicit(&init, &gt, shape, &cfg)?,
    };
    Ok(trace)
}

pub(crate) fn run(args: &EvolveArgs, stdout: &mut dyn Write) -> CliResult {
    let trace = simulate(args)?;
    let summary = EvolutionSummary::from(&trace);
    if let Some(dir) = &args.run.out {
        ensure_dir(dir)?;
        write_file(dir, "trace.csv", &write_trace_csv(&trace))?;
        write_file(dir, "summary.json", &write_report_json(&summary))?;
        for snap in &trace.snapshots {
            write_file(
                dir,
                &format!("step_{:06}.pgm", snap.step),
                &write_field_pgm(&snap.psi),
            )?;
        }
    }
    emit(stdout, &summary)
}
