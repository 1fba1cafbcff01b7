use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use elane_core::dataio::MetricsReport;
use elane_core::metrics::{
    match_and_score, tusimple_score, DEFAULT_IOU_THRESHOLD, DEFAULT_MATCH_FRACTION,
    DEFAULT_STROKE_WIDTH, DEFAULT_X_THRESHOLD,
};
use elane_core::{DetectionMetrics, GridShape, LaneSet, TusimpleMetrics};
use rayon::prelude::*;

use crate::common::{emit, ensure_dir, load_lanes, parse_grid, write_file};
use crate::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MetricMode {
    /// IoU matching of rasterized strokes.
    Culane,
    /// Per-point lateral accuracy.
    Tusimple,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Directory of predicted annotation files.
    pub pred_dir: PathBuf,
    /// Directory of ground-truth annotation files; every `*.txt` is scored.
    pub gt_dir: PathBuf,
    #[arg(long, value_enum, default_value_t = MetricMode::Culane)]
    pub metric: MetricMode,
    /// Evaluation image size as WIDTHxHEIGHT.
    #[arg(long, default_value = "1640x590", value_parser = parse_grid)]
    pub image: GridShape,
    #[arg(long, default_value_t = DEFAULT_IOU_THRESHOLD)]
    pub iou_thresh: f64,
    /// Stroke width used for IoU masks.
    #[arg(long, default_value_t = DEFAULT_STROKE_WIDTH)]
    pub width_px: usize,
    #[arg(long, default_value_t = DEFAULT_X_THRESHOLD)]
    pub x_thresh: f64,
    /// Share of a lane's points that must be correct for a point-accuracy match.
    #[arg(long, default_value_t = DEFAULT_MATCH_FRACTION)]
    pub match_frac: f64,
    /// Spacing of the rows annotations are resampled onto.
    #[arg(long, default_value_t = 10)]
    pub row_step: usize,
    /// Label copied into the report.
    #[arg(long)]
    pub category: Option<String>,
    /// Directory for the per-image CSV.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

enum ImageScore {
    Detection(DetectionMetrics),
    Points(TusimpleMetrics),
}

fn annotation_names(dir: &Path) -> CliResult<Vec<String>> {
    let entries = fs::read_dir(dir).map_err(CliError::io(dir))?;
    let mut names = Vec::new();
    for entry in entries {
        let entry = entry.map_err(CliError::io(dir))?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if name.ends_with(".txt") && entry.path().is_file() {
            names.push(name);
        }
    }
    names.sort();
    Ok(names)
}

fn validate(args: &EvalArgs) -> CliResult {
    let bad = |msg: &str| Err(CliError::Input(msg.to_string()));
    if !(0.0..=1.0).contains(&args.iou_thresh) {
        return bad("--iou-thresh must lie in [0, 1]");
    }
    if args.width_px == 0 {
        return bad("--width-px must be at least 1");
    }
    if !args.x_thresh.is_finite() || args.x_thresh <= 0.0 {
        return bad("--x-thresh must be positive");
    }
    if !(0.0..=1.0).contains(&args.match_frac) {
        return bad("--match-frac must lie in [0, 1]");
    }
    if args.row_step == 0 {
        return bad("--row-step must be at least 1");
    }
    Ok(())
}

pub(crate) fn run(args: &EvalArgs, stdout: &mut dyn Write) -> CliResult {
    validate(args)?;
    let names = annotation_names(&args.gt_dir)?;
    if let Some(missing) = names.iter().find(|n| !args.pred_dir.join(n).is_file()) {
        return Err(CliError::Input(format!(
            "missing prediction file {}",
            args.pred_dir.join(missing).display()
        )));
    }
    let rows: Vec<usize> = (0..args.image.height()).step_by(args.row_step).collect();
    let load = |dir: &Path, name: &str| -> CliResult<LaneSet> {
        Ok(LaneSet::new(
            args.image,
            load_lanes(&dir.join(name), &rows, (1.0, 1.0))?,
        ))
    };

    let scores = names
        .par_iter()
        .map(|name| {
            let preds = load(&args.pred_dir, name)?;
            let gts = load(&args.gt_dir, name)?;
            Ok(match args.metric {
                MetricMode::Culane => ImageScore::Detection(match_and_score(
                    &preds,
                    &gts,
                    args.iou_thresh,
                    args.width_px,
                )?),
                MetricMode::Tusimple => ImageScore::Points(tusimple_score(
                    &preds,
                    &gts,
                    args.x_thresh,
                    args.match_frac,
                )?),
            })
        })
        .collect::<CliResult<Vec<ImageScore>>>()?;

    let mut csv = String::new();
    let mut report: MetricsReport = match args.metric {
        MetricMode::Culane => {
            csv.push_str("image,tp,fp,fn\n");
            let mut total = DetectionMetrics::default();
            for (name, score) in names.iter().zip(&scores) {
                if let ImageScore::Detection(m) = score {
                    let _ = writeln!(csv, "{name},{},{},{}", m.tp, m.fp, m.fn_);
                    total = total.merge(m);
                }
            }
            total.into()
        }
        MetricMode::Tusimple => {
            csv.push_str("image,correct_points,gt_points,fp_lanes,fn_lanes\n");
            let mut total = TusimpleMetrics::default();
            for (name, score) in names.iter().zip(&scores) {
                if let ImageScore::Points(m) = score {
                    let _ = writeln!(
                        csv,
                        "{name},{},{},{},{}",
                        m.correct_points, m.gt_points, m.fp_lanes, m.fn_lanes
                    );
                    total = total.merge(m);
                }
            }
            total.into()
        }
    };
    report.category = args.category.clone();

    if let Some(dir) = &args.out {
        ensure_dir(dir)?;
        write_file(dir, "per_image.csv", csv.as_bytes())?;
    }
    emit(stdout, &report)
}
