//! Fixtures shared by the benchmarks.

use elane_core::elm::encode_lane;
use elane_core::{Field2D, GridShape, HeavisideParams, LanePolyline};

/// Ground truth and prediction fields for two vertical lanes `gap` pixels apart.
pub fn lane_pair(width: usize, height: usize, gap: f64) -> (Field2D, Field2D) {
    let shape = GridShape::new(width, height).expect("benchmark grid");
    let p = HeavisideParams::default();
    let center = width as f64 / 2.0;
    let gt = encode_lane(&LanePolyline::vertical(center, height), shape, p).expect("gt lane");
    let pred =
        encode_lane(&LanePolyline::vertical(center - gap, height), shape, p).expect("pred lane");
    (gt.0, pred.0)
}
