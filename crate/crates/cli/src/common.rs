use std::fs;
use std::io::Write;
use std::path::Path;

use clap::Args;
use elane_core::dataio::{parse_culane_lines, resample_lane, write_report_json};
use elane_core::{EieParams, Field2D, GridShape, HeavisideParams, LanePolyline};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::{CliError, CliResult};

/// Parses `WxH`, e.g. `100x36`.
pub fn parse_grid(s: &str) -> Result<GridShape, String> {
    let (w, h) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected WxH, got `{s}`"))?;
    let num = |v: &str| {
        v.trim()
            .parse::<usize>()
            .map_err(|_| format!("bad size `{v}` in `{s}`"))
    };
    GridShape::new(num(w)?, num(h)?).map_err(|e| e.to_string())
}

/// Grid and energy flags shared by the field-level subcommands.
#[derive(Debug, Clone, Args)]
pub struct GridArgs {
    /// ELM grid as WIDTHxROWS.
    #[arg(long, default_value = "100x36", value_parser = parse_grid)]
    pub grid: GridShape,
    /// Heaviside half-width in pixels [default: 5 for 18 rows, else 3].
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Weight of the prediction in the difference field.
    #[arg(long, default_value_t = 0.5)]
    pub alpha: f64,
    /// Size of the annotation images as WIDTHxHEIGHT; coordinates are scaled
    /// onto the grid [default: same as the grid].
    #[arg(long, value_parser = parse_grid)]
    pub image: Option<GridShape>,
}

impl GridArgs {
    pub fn heaviside(&self) -> CliResult<HeavisideParams> {
        match self.sigma {
            Some(s) => Ok(HeavisideParams::new(s)?),
            None => Ok(HeavisideParams::for_rows(self.grid.height())),
        }
    }

    pub fn eie(&self) -> CliResult<EieParams> {
        Ok(EieParams::new(self.alpha)?)
    }

    /// Annotation-to-grid scale factors `(sx, sy)`.
    pub fn scale(&self) -> (f64, f64) {
        match self.image {
            Some(img) => (
                self.grid.width() as f64 / img.width() as f64,
                self.grid.height() as f64 / img.height() as f64,
            ),
            None => (1.0, 1.0),
        }
    }

    pub fn rows(&self) -> Vec<usize> {
        (0..self.grid.height()).collect()
    }

    /// Lanes of an annotation file, resampled onto every grid row.
    pub fn load_lanes(&self, path: &Path) -> CliResult<Vec<LanePolyline>> {
        load_lanes(path, &self.rows(), self.scale())
    }

    /// First lane of an annotation file.
    pub fn load_first_lane(&self, path: &Path) -> CliResult<LanePolyline> {
        self.load_lanes(path)?
            .into_iter()
            .next()
            .ok_or_else(|| CliError::Input(format!("{}: no lanes", path.display())))
    }
}

pub fn read_text(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(CliError::io(path))
}

/// Parses an annotation file and resamples each lane onto `rows`.
/// Lanes without any sample on those rows are dropped.
pub fn load_lanes(path: &Path, rows: &[usize], scale: (f64, f64)) -> CliResult<Vec<LanePolyline>> {
    let text = read_text(path)?;
    let raw = parse_culane_lines(&text)
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    let mut lanes = Vec::with_capacity(raw.len());
    for points in &raw {
        let lane = resample_lane(points, rows, scale)?;
        if lane.valid_count() > 0 {
            lanes.push(lane);
        }
    }
    Ok(lanes)
}

pub fn ensure_dir(dir: &Path) -> CliResult {
    fs::create_dir_all(dir).map_err(CliError::io(dir))
}

pub fn write_file(dir: &Path, name: &str, bytes: &[u8]) -> CliResult {
    let path = dir.join(name);
    fs::write(&path, bytes).map_err(CliError::io(path))
}

/// Writes `report` as one JSON line.
pub fn emit<T: Serialize>(out: &mut dyn Write, report: &T) -> CliResult {
    let mut bytes = write_report_json(report);
    bytes.push(b'\n');
    out.write_all(&bytes).map_err(CliError::io("<stdout>"))
}

/// `count` fields of independent uniform values in `[-0.5, 0.5)`.
pub fn random_fields(seed: u64, shape: GridShape, count: usize) -> Vec<Field2D> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| Field2D::from_fn(shape, |_, _| rng.gen_range(-0.5..0.5)))
        .collect()
}
