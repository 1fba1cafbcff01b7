//! Lane-set scoring: IoU-matched precision/recall/F1 and point accuracy.

mod assignment;
mod raster;

pub use assignment::max_weight_assignment;
pub use raster::{lane_iou, rasterize_lane, LaneMask, DEFAULT_STROKE_WIDTH};

use serde::{Deserialize, Serialize};

use crate::elm::LanePolyline;
use crate::error::{Error, Result};
use crate::field::GridShape;

pub const DEFAULT_IOU_THRESHOLD: f64 = 0.5;
pub const DEFAULT_X_THRESHOLD: f64 = 20.0;
pub const DEFAULT_MATCH_FRACTION: f64 = 0.85;

/// Lanes of one image, in image pixel coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct LaneSet {
    pub image_shape: GridShape,
    pub lanes: Vec<LanePolyline>,
}

impl LaneSet {
    pub fn new(image_shape: GridShape, lanes: Vec<LanePolyline>) -> Self {
        Self { image_shape, lanes }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DetectionMetrics {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

impl DetectionMetrics {
    pub fn from_counts(tp: usize, fp: usize, fn_: usize) -> Self {
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        Self {
            tp,
            fp,
            fn_,
            precision,
            recall,
            f1,
        }
    }

    /// Pools the counts of two evaluations.
    pub fn merge(&self, other: &DetectionMetrics) -> Self {
        Self::from_counts(self.tp + other.tp, self.fp + other.fp, self.fn_ + other.fn_)
    }
}

/// One-to-one IoU matching of predicted and ground-truth lanes.
///
/// Both sets are rasterized as strokes of `width_px`. The assignment
/// maximizing total IoU is found with the Hungarian method, and assigned pairs
/// with IoU of at least `iou_thresh` count as true positives.
pub fn match_and_score(
    preds: &LaneSet,
    gts: &LaneSet,
    iou_thresh: f64,
    width_px: usize,
) -> Result<DetectionMetrics> {
    preds.image_shape.ensure_same(&gts.image_shape)?;
    if width_px == 0 {
        return Err(Error::param("width_px", "must be at least 1"));
    }
    let shape = gts.image_shape;
    let pred_masks: Vec<LaneMask> = preds
        .lanes
        .iter()
        .map(|l| rasterize_lane(l, width_px, shape))
        .collect();
    let gt_masks: Vec<LaneMask> = gts
        .lanes
        .iter()
        .map(|l| rasterize_lane(l, width_px, shape))
        .collect();

    let ious = pred_masks
        .iter()
        .map(|p| {
            gt_masks
                .iter()
                .map(|g| lane_iou(p, g))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let tp = max_weight_assignment(&ious)
        .iter()
        .enumerate()
        .filter(|(i, j)| matches!(j, Some(j) if ious[*i][*j] >= iou_thresh))
        .count();
    Ok(DetectionMetrics::from_counts(
        tp,
        preds.lanes.len() - tp,
        gts.lanes.len() - tp,
    ))
}

/// Point-accuracy counts; rates are derived from the pooled counts.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TusimpleMetrics {
    pub correct_points: usize,
    pub gt_points: usize,
    pub fp_lanes: usize,
    pub fn_lanes: usize,
    pub pred_lanes: usize,
    pub gt_lanes: usize,
}

impl TusimpleMetrics {
    pub fn acc(&self) -> f64 {
        ratio(self.correct_points, self.gt_points)
    }

    pub fn fp_rate(&self) -> f64 {
        ratio(self.fp_lanes, self.pred_lanes)
    }

    pub fn fn_rate(&self) -> f64 {
        ratio(self.fn_lanes, self.gt_lanes)
    }

    pub fn merge(&self, other: &TusimpleMetrics) -> Self {
        Self {
            correct_points: self.correct_points + other.correct_points,
            gt_points: self.gt_points + other.gt_points,
            fp_lanes: self.fp_lanes + other.fp_lanes,
            fn_lanes: self.fn_lanes + other.fn_lanes,
            pred_lanes: self.pred_lanes + other.pred_lanes,
            gt_lanes: self.gt_lanes + other.gt_lanes,
        }
    }
}

fn correct_points(pred: &LanePolyline, gt: &LanePolyline, x_thresh: f64) -> usize {
    gt.valid_points()
        .filter(|&(r, xg)| matches!(pred.x_at(r), Some(xp) if (xp - xg).abs() < x_thresh))
        .count()
}

/// Point accuracy of row-sampled lanes.
///
/// A point is correct when it lies within `x_thresh` of the ground truth on
/// the same row. Lanes are paired to maximize the number of correct points;
/// a pair counts as matched when at least `match_frac` of the ground-truth
/// lane's points are correct. Unmatched predictions are false positives and
/// unmatched ground truths false negatives.
pub fn tusimple_score(
    preds: &LaneSet,
    gts: &LaneSet,
    x_thresh: f64,
    match_frac: f64,
) -> Result<TusimpleMetrics> {
    preds.image_shape.ensure_same(&gts.image_shape)?;
    let mut all = preds.lanes.iter().chain(&gts.lanes);
    if let Some(first) = all.next() {
        if all.any(|l| l.rows() != first.rows()) {
            return Err(Error::RowSetMismatch);
        }
    }

    let counts: Vec<Vec<usize>> = preds
        .lanes
        .iter()
        .map(|p| {
            gts.lanes
                .iter()
                .map(|g| correct_points(p, g, x_thresh))
                .collect()
        })
        .collect();
    let weights: Vec<Vec<f64>> = counts
        .iter()
        .map(|r| r.iter().map(|&c| c as f64).collect())
        .collect();

    let mut correct = 0;
    let mut matched = 0;
    for (i, j) in max_weight_assignment(&weights).into_iter().enumerate() {
        let Some(j) = j else { continue };
        let c = counts[i][j];
        correct += c;
        let total = gts.lanes[j].valid_count();
        if total > 0 && c as f64 >= match_frac * total as f64 {
            matched += 1;
        }
    }
    Ok(TusimpleMetrics {
        correct_points: correct,
        gt_points: gts.lanes.iter().map(LanePolyline::valid_count).sum(),
        fp_lanes: preds.lanes.len() - matched,
        fn_lanes: gts.lanes.len() - matched,
        pred_lanes: preds.lanes.len(),
        gt_lanes: gts.lanes.len(),
    })
}
