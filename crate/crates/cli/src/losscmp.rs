use std::io::Write;

use clap::Args;
use elane_core::dataio::{write_report_json, write_trace_csv, EvolutionSummary};
use elane_core::elm::{build_level_set, encode_lane};
use elane_core::energy::{descent_direction, mse_gradient_wrt_phi};
use elane_core::evolve::{evolve_implicit, evolve_mse};
use elane_core::{EvolutionMode, Field2D, LanePolyline};
use serde::Serialize;

use crate::common::{emit, ensure_dir, write_file, GridArgs};
use crate::evolve::RunArgs;
use crate::{CliError, CliResult};

#[derive(Debug, Args)]
pub struct LosscmpArgs {
    #[command(flatten)]
    pub grid: GridArgs,
    #[command(flatten)]
    pub run: RunArgs,
    /// Offset of the initial prediction to the left of the ground truth, in units of sigma.
    #[arg(long, default_value_t = 10.0)]
    pub separation: f64,
    /// Per-pixel step of the MSE descent in the level set [default: sigma²].
    #[arg(long)]
    pub mse_step: Option<f64>,
}

/// Where each loss provides a training signal for the initial prediction.
#[derive(Debug, Clone, Serialize)]
pub struct Locality {
    /// Pixels whose level-set value lies at least sigma from the prediction.
    pub far_fraction: f64,
    /// Pixels where the MSE gradient with respect to the level set is exactly zero.
    pub mse_zero_fraction: f64,
    /// Largest MSE gradient magnitude over the far pixels.
    pub mse_far_max: f64,
    /// Pixels where the elastic-energy gradient is exactly zero.
    pub eie_zero_fraction: f64,
    /// Smallest elastic-energy gradient magnitude on the ground-truth column,
    /// relative to its maximum over the grid.
    pub eie_gt_column_ratio: f64,
}

#[derive(Debug, Serialize)]
pub struct LosscmpReport {
    pub eie_trace: EvolutionSummary,
    pub mse_trace: EvolutionSummary,
    pub locality: Locality,
}

fn fraction(f: &Field2D, pred: impl Fn(usize) -> bool) -> f64 {
    let n = f.as_slice().len();
    (0..n).filter(|&i| pred(i)).count() as f64 / n as f64
}

pub fn locality(
    gt_lane: &LanePolyline,
    gt: &Field2D,
    psi: &Field2D,
    phi: &Field2D,
    sigma: f64,
    eie_grad: &Field2D,
    mse_grad: &Field2D,
) -> Locality {
    let far = |i: usize| phi.as_slice()[i].abs() >= sigma;
    let max_eie = eie_grad.max_abs();
    let width = gt.shape().width();
    let column_min = gt_lane
        .valid_points()
        .map(|(r, x)| {
            let col = (x.round().max(0.0) as usize).min(width - 1);
            eie_grad.get(col, r).abs()
        })
        .fold(f64::INFINITY, f64::min);
    debug_assert_eq!(psi.shape(), gt.shape());
    Locality {
        far_fraction: fraction(phi, far),
        mse_zero_fraction: fraction(mse_grad, |i| mse_grad.as_slice()[i] == 0.0),
        mse_far_max: (0..phi.as_slice().len())
            .filter(|&i| far(i))
            .map(|i| mse_grad.as_slice()[i].abs())
            .fold(0.0, f64::max),
        eie_zero_fraction: fraction(eie_grad, |i| eie_grad.as_slice()[i] == 0.0),
        eie_gt_column_ratio: if max_eie > 0.0 && column_min.is_finite() {
            column_min / max_eie
        } else {
            0.0
        },
    }
}

pub fn compare(args: &LosscmpArgs) -> CliResult<(LosscmpReport, Vec<u8>, Vec<u8>)> {
    if !(args.separation.is_finite() && args.separation >= 0.0) {
        return Err(CliError::Input("--separation must be nonnegative".into()));
    }
    let shape = args.grid.grid;
    let cfg = args.run.config(&args.grid, EvolutionMode::Implicit)?;
    let p = cfg.heaviside;
    let sigma = p.sigma();
    let mut mse_cfg = cfg;
    mse_cfg.step_size = args.mse_step.unwrap_or(sigma * sigma);
    mse_cfg.validate()?;

    let gt_lane = args.run.gt_lane(&args.grid)?;
    let init = gt_lane.shifted(-args.separation * sigma);
    let (gt, mask) = encode_lane(&gt_lane, shape, p)?;
    let (psi, _) = encode_lane(&init, shape, p)?;
    let phi = build_level_set(&init, shape)?;

    let eie_grad = descent_direction(&gt, &psi, cfg.eie)?;
    let mse_grad = mse_gradient_wrt_phi(&gt, &psi, &phi, p)?;
    let locality = locality(&gt_lane, &gt, &psi, &phi, sigma, &eie_grad, &mse_grad);

    let eie = evolve_implicit(&psi, &gt, &mask, &cfg)?;
    let mse = evolve_mse(&phi, &gt, &mask, &mse_cfg)?;
    let report = LosscmpReport {
        eie_trace: EvolutionSummary::from(&eie),
        mse_trace: EvolutionSummary::from(&mse),
        locality,
    };
    Ok((report, write_trace_csv(&eie), write_trace_csv(&mse)))
}

pub(crate) fn run(args: &LosscmpArgs, stdout: &mut dyn Write) -> CliResult {
    let (report, eie_csv, mse_csv) = compare(args)?;
    if let Some(dir) = &args.run.out {
        ensure_dir(dir)?;
        write_file(dir, "eie_trace.csv", &eie_csv)?;
        write_file(dir, "mse_trace.csv", &mse_csv)?;
        write_file(dir, "losscmp.json", &write_report_json(&report))?;
    }
    emit(stdout, &report)
}
