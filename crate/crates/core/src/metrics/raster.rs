use crate::elm::LanePolyline;
use crate::error::Result;
use crate::field::GridShape;

/// Default stroke width for IoU scoring, in evaluation pixels.
pub const DEFAULT_STROKE_WIDTH: usize = 30;

/// Binary image mask.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LaneMask {
    shape: GridShape,
    bits: Vec<bool>,
}

impl LaneMask {
    pub fn empty(shape: GridShape) -> Self {
        Self {
            shape,
            bits: vec![false; shape.len()],
        }
    }

    pub fn shape(&self) -> GridShape {
        self.shape
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[self.shape.index(x, y)]
    }

    pub fn set(&mut self, x: usize, y: usize) {
        let i = self.shape.index(x, y);
        self.bits[i] = true;
    }

    pub fn area(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|b| *b)
    }

    /// Pixels set in row `y`.
    pub fn row_count(&self, y: usize) -> usize {
        let w = self.shape.width();
        self.bits[y * w..(y + 1) * w].iter().filter(|b| **b).count()
    }

    fn bits(&self) -> &[bool] {
        &self.bits
    }
}

/// Draws the lane as a stroke `width_px` wide, measured perpendicular to the
/// lane, between consecutive valid samples.
///
/// Each image row between the first and last valid sample is filled over the
/// half-open span `[x - hw, x + hw)` of pixel columns, where `x` is the
/// linearly interpolated lane position and `hw` the half-width stretched by
/// the local slope. A vertical lane therefore covers exactly `width_px`
/// columns per row.
pub fn rasterize_lane(lane: &LanePolyline, width_px: usize, shape: GridShape) -> LaneMask {
    let mut mask = LaneMask::empty(shape);
    let points: Vec<(usize, f64)> = lane.valid_points().collect();
    let half = width_px as f64 / 2.0;
    let max_x = shape.width() as i64;

    let mut fill = |y: usize, x: f64, slope: f64| {
        if y >= shape.height() {
            return;
        }
        let hw = half * slope.hypot(1.0);
        let start = (x - hw).ceil() as i64;
        let end = (x + hw).ceil() as i64;
        for px in start.max(0)..end.min(max_x) {
            mask.set(px as usize, y);
        }
    };

    match points.as_slice() {
        [] => {}
        [(r, x)] => fill(*r, *x, 0.0),
        _ => {
            for (i, seg) in points.windows(2).enumerate() {
                let ((r0, x0), (r1, x1)) = (seg[0], seg[1]);
                let slope = (x1 - x0) / (r1 - r0) as f64;
                // The shared end row belongs to the next segment, except for the last one.
                let last = if i + 2 == points.len() { r1 } else { r1 - 1 };
                for y in r0..=last {
                    fill(y, x0 + slope * (y - r0) as f64, slope);
                }
            }
        }
    }
    mask
}

/// `|a ∩ b| / |a ∪ b|`, zero when both masks are empty.
pub fn lane_iou(a: &LaneMask, b: &LaneMask) -> Result<f64> {
    a.shape().ensure_same(&b.shape())?;
    let (mut inter, mut union) = (0usize, 0usize);
    for (&pa, &pb) in a.bits().iter().zip(b.bits()) {
        inter += (pa && pb) as usize;
        union += (pa || pb) as usize;
    }
    Ok(if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    })
}
