//! Annotation ingress (CULane line format) and artifact serialization:
//! PGM field dumps, trace CSVs and JSON reports.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::elm::LanePolyline;
use crate::error::{Error, Result};
use crate::evolve::EvolutionTrace;
use crate::field::{Field2D, GridShape};
use crate::metrics::{DetectionMetrics, TusimpleMetrics};

/// Raw lane coordinates as `(x, y)` pairs in annotation pixels.
pub type RawLane = Vec<(f64, f64)>;

/// Lanes of one annotated image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationRecord {
    pub image_id: String,
    pub lanes: Vec<RawLane>,
}

impl AnnotationRecord {
    pub fn parse(image_id: impl Into<String>, text: &str) -> Result<Self> {
        Ok(Self {
            image_id: image_id.into(),
            lanes: parse_culane_lines(text)?,
        })
    }
}

/// Parses one lane per nonempty line of alternating `x y` values.
///
/// Points keep their raw coordinates; those with `x < 0` are treated as
/// missing by [`resample_lane`].
pub fn parse_culane_lines(text: &str) -> Result<Vec<RawLane>> {
    let mut lanes = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.is_empty() {
            continue;
        }
        if !tokens.len().is_multiple_of(2) {
            return Err(Error::Parse {
                line: line_no,
                message: format!("odd number of coordinates ({})", tokens.len()),
            });
        }
        let values = tokens
            .iter()
            .map(|t| match t.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(Error::Parse {
                    line: line_no,
                    message: format!("invalid coordinate `{t}`"),
                }),
            })
            .collect::<Result<Vec<f64>>>()?;
        lanes.push(values.chunks_exact(2).map(|c| (c[0], c[1])).collect());
    }
    Ok(lanes)
}

/// Inverse of [`parse_culane_lines`].
pub fn format_culane_lines(lanes: &[RawLane]) -> String {
    let mut out = String::new();
    for lane in lanes {
        let line: Vec<String> = lane.iter().map(|(x, y)| format!("{x} {y}")).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    out
}

/// Writes the valid samples of `lane` as one annotation line (x then y).
pub fn lane_to_raw(lane: &LanePolyline) -> RawLane {
    lane.valid_points().map(|(r, x)| (x, r as f64)).collect()
}

/// Resamples raw points onto `rows` by linear interpolation in y.
///
/// Coordinates are first scaled into the target frame, `(x·sx, y·sy)`.
/// Points with negative x are ignored, and rows outside the span of the
/// remaining points are left invalid.
pub fn resample_lane(
    points: &[(f64, f64)],
    rows: &[usize],
    scale: (f64, f64),
) -> Result<LanePolyline> {
    let (sx, sy) = scale;
    let mut pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|(x, _)| *x >= 0.0)
        .map(|&(x, y)| (y * sy, x * sx))
        .collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    pts.dedup_by(|a, b| a.0 == b.0);

    let xs = rows
        .iter()
        .map(|&r| {
            let y = r as f64;
            let k = pts.partition_point(|p| p.0 < y);
            match (k.checked_sub(1).map(|j| pts[j]), pts.get(k)) {
                (_, Some(&(y1, x1))) if y1 == y => Some(x1),
                (Some((y0, x0)), Some(&(y1, x1))) => Some(x0 + (x1 - x0) * (y - y0) / (y1 - y0)),
                _ => None,
            }
        })
        .collect();
    LanePolyline::new(rows.to_vec(), xs)
}

/// Quantizes `v` from `[lo, hi]` to a byte, rounding half up and clipping.
pub fn quantize(v: f64, lo: f64, hi: f64) -> u8 {
    let scaled = (v - lo) / (hi - lo) * 255.0;
    (scaled + 0.5).floor().clamp(0.0, 255.0) as u8
}

/// Byte value back to the `[-0.5, 0.5]` range.
pub fn dequantize(b: u8) -> f64 {
    b as f64 / 255.0 - 0.5
}

/// Binary PGM of a field with values in `[-0.5, 0.5]`.
pub fn write_field_pgm(f: &Field2D) -> Vec<u8> {
    write_field_pgm_range(f, -0.5, 0.5)
}

/// Binary PGM mapping `[lo, hi]` onto `0..=255`.
pub fn write_field_pgm_range(f: &Field2D, lo: f64, hi: f64) -> Vec<u8> {
    let shape = f.shape();
    let mut out = format!("P5\n{} {}\n255\n", shape.width(), shape.height()).into_bytes();
    out.extend(f.as_slice().iter().map(|&v| quantize(v, lo, hi)));
    out
}

/// Decoded PGM image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pgm {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
}

impl Pgm {
    /// Pixels mapped back to a `[-0.5, 0.5]` field.
    pub fn to_field(&self) -> Result<Field2D> {
        let shape = GridShape::new(self.width, self.height)?;
        Field2D::new(shape, self.pixels.iter().map(|&b| dequantize(b)).collect())
    }
}

/// Reads the P5 files produced by [`write_field_pgm`] (maxval 255, no comments).
pub fn read_pgm(bytes: &[u8]) -> Result<Pgm> {
    let bad = |message: &str| Error::Parse {
        line: 0,
        message: format!("pgm: {message}"),
    };
    let mut fields = Vec::with_capacity(4);
    let mut pos = 0;
    while fields.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(bad("truncated header"));
        }
        fields
            .push(std::str::from_utf8(&bytes[start..pos]).map_err(|_| bad("header is not ASCII"))?);
    }
    // Exactly one whitespace byte separates the header from the raster.
    pos += 1;
    if fields[0] != "P5" {
        return Err(bad("not a binary graymap"));
    }
    let num = |s: &str| s.parse::<usize>().map_err(|_| bad("bad header number"));
    let (width, height, maxval) = (num(fields[1])?, num(fields[2])?, num(fields[3])?);
    if maxval != 255 {
        return Err(bad("maxval must be 255"));
    }
    let pixels = bytes.get(pos..).unwrap_or_default();
    if pixels.len() != width * height {
        return Err(bad("raster size does not match header"));
    }
    Ok(Pgm {
        width,
        height,
        pixels: pixels.to_vec(),
    })
}

/// Trace as CSV: `step,energy,lane_error`, one line per recorded step.
pub fn write_trace_csv(t: &EvolutionTrace) -> Vec<u8> {
    let mut out = String::from("step,energy,lane_error\n");
    for (i, (step, energy)) in t.steps.iter().zip(&t.energies).enumerate() {
        let _ = write!(out, "{step},{energy:.12e},");
        if let Some(err) = t.lane_errors.get(i) {
            let _ = write!(out, "{err:.12e}");
        }
        out.push('\n');
    }
    out.into_bytes()
}

/// Metric report: detection counts plus, in point-accuracy mode, the rates.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub f1: f64,
    pub precision: f64,
    pub recall: f64,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub acc: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fp_rate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fn_rate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub category: Option<String>,
}

impl From<DetectionMetrics> for MetricsReport {
    fn from(m: DetectionMetrics) -> Self {
        Self {
            f1: m.f1,
            precision: m.precision,
            recall: m.recall,
            tp: m.tp,
            fp: m.fp,
            fn_: m.fn_,
            acc: None,
            fp_rate: None,
            fn_rate: None,
            category: None,
        }
    }
}

impl From<TusimpleMetrics> for MetricsReport {
    fn from(m: TusimpleMetrics) -> Self {
        let matched = m.pred_lanes - m.fp_lanes;
        let base = DetectionMetrics::from_counts(matched, m.fp_lanes, m.fn_lanes);
        Self {
            acc: Some(m.acc()),
            fp_rate: Some(m.fp_rate()),
            fn_rate: Some(m.fn_rate()),
            ..base.into()
        }
    }
}

/// Outcome of one evolution run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvolutionSummary {
    pub final_energy: Option<f64>,
    pub final_lane_error: Option<f64>,
    pub steps: usize,
    pub converged: bool,
}

impl From<&EvolutionTrace> for EvolutionSummary {
    fn from(t: &EvolutionTrace) -> Self {
        Self {
            final_energy: t.final_energy(),
            final_lane_error: t.final_lane_error(),
            steps: t.steps_taken,
            converged: t.converged,
        }
    }
}

/// Compact single-object JSON with keys in declaration order.
pub fn write_report_json<T: Serialize>(report: &T) -> Vec<u8> {
    serde_json::to_vec(report).expect("report types serialize infallibly")
}
