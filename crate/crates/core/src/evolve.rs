//! Gradient-flow simulation of a predicted lane under the elastic energy.
//!
//! Implicit mode evolves the prediction's ELM field directly. Explicit mode
//! moves the row samples of the predicted lane sideways with the velocity
//! obtained by averaging the spectral gradient around each sample.

use serde::{Deserialize, Serialize};

use crate::elm::{
    decode_lane, encode_lane, encode_lane_pixel_averaged, heaviside, smoothed_heaviside,
    HeavisideParams, LanePolyline, RangeMask,
};
use crate::energy::{difference_field, mse_energy, mse_gradient_wrt_phi, EieOperator, EieParams};
use crate::error::{Error, Result};
use crate::field::{Field2D, GridShape};

/// Consecutive recorded energy increases that abort a run.
pub const DIVERGENCE_PATIENCE: usize = 10;

/// Slack allowed when comparing successive recorded energies.
pub const ENERGY_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvolutionMode {
    Implicit,
    Explicit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvolutionConfig {
    pub mode: EvolutionMode,
    pub step_size: f64,
    pub max_steps: usize,
    pub eie: EieParams,
    pub heaviside: HeavisideParams,
    /// Clamp Ψ to `[-0.5, 0.5]` after each implicit step.
    pub clamp: bool,
    /// Decode and re-encode the implicit field every this many steps; 0 disables it.
    pub reinit_every: usize,
    /// Record energy and lane error every this many steps.
    pub record_every: usize,
    /// Stop once a step lowers the energy by less than this amount.
    pub stop_tol: f64,
    /// Keep the field and decoded lane at every recorded step.
    pub keep_snapshots: bool,
}

impl Default for EvolutionConfig {
    fn default() -> Self {
        Self {
            mode: EvolutionMode::Implicit,
            step_size: 0.1,
            max_steps: 2000,
            eie: EieParams::default(),
            heaviside: HeavisideParams::default(),
            clamp: true,
            reinit_every: 0,
            record_every: 1,
            stop_tol: 1e-12,
            keep_snapshots: false,
        }
    }
}

impl EvolutionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.step_size.is_finite() && self.step_size > 0.0) {
            return Err(Error::param(
                "step_size",
                format!("must be positive, got {}", self.step_size),
            ));
        }
        if self.max_steps == 0 {
            return Err(Error::param("max_steps", "must be at least 1"));
        }
        if self.record_every == 0 {
            return Err(Error::param("record_every", "must be at least 1"));
        }
        if !(self.stop_tol.is_finite() && self.stop_tol >= 0.0) {
            return Err(Error::param(
                "stop_tol",
                format!("must be nonnegative, got {}", self.stop_tol),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub step: usize,
    pub psi: Field2D,
    pub lane: LanePolyline,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EvolutionTrace {
    /// Step index of each record; step 0 is the initial state.
    pub steps: Vec<usize>,
    pub energies: Vec<f64>,
    /// Largest decoded `|x_pred - x_gt|` over the ground truth's rows.
    pub lane_errors: Vec<f64>,
    pub snapshots: Vec<Snapshot>,
    /// Update steps actually performed.
    pub steps_taken: usize,
    /// Stopped on `stop_tol` before reaching `max_steps`.
    pub converged: bool,
    /// Explicit mode only: a sample had to be clamped to the grid edge.
    pub hit_boundary: bool,
    pub final_lane: Option<LanePolyline>,
}

impl EvolutionTrace {
    pub fn len(&self) -> usize {
        self.energies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.energies.is_empty()
    }

    pub fn final_energy(&self) -> Option<f64> {
        self.energies.last().copied()
    }

    pub fn final_lane_error(&self) -> Option<f64> {
        self.lane_errors.last().copied()
    }

    /// True when every recorded energy is at most the previous one plus slack.
    pub fn is_monotone(&self, slack: f64) -> bool {
        self.energies.windows(2).all(|w| w[1] <= w[0] + slack)
    }
}

/// Largest horizontal error over the ground truth's valid rows. Rows the
/// prediction lost count as a full grid width.
pub fn lane_error(pred: &LanePolyline, gt: &LanePolyline, width: usize) -> f64 {
    gt.valid_points()
        .map(|(r, xg)| match pred.x_at(r) {
            Some(xp) => (xp - xg).abs(),
            None => width as f64,
        })
        .fold(0.0, f64::max)
}

/// Bookkeeping shared by both modes: recording, early stop and the divergence guard.
struct Recorder<'a> {
    cfg: &'a EvolutionConfig,
    trace: EvolutionTrace,
    last_energy: f64,
    min_recorded: f64,
    rising: usize,
}

enum Outcome {
    Continue,
    Converged,
}

impl<'a> Recorder<'a> {
    fn new(cfg: &'a EvolutionConfig, energy: f64, error: f64, snapshot: Option<Snapshot>) -> Self {
        let mut trace = EvolutionTrace::default();
        trace.steps.push(0);
        trace.energies.push(energy);
        trace.lane_errors.push(error);
        trace.snapshots.extend(snapshot);
        Self {
            cfg,
            trace,
            last_energy: energy,
            min_recorded: energy,
            rising: 0,
        }
    }

    /// Registers the state after `step`; `observe` is only called for recorded steps.
    fn step(
        &mut self,
        step: usize,
        energy: f64,
        observe: impl FnOnce() -> Result<(f64, Option<Snapshot>)>,
    ) -> Result<Outcome> {
        if !energy.is_finite() {
            return Err(self.divergence(step));
        }
        self.trace.steps_taken = step;
        let decrease = self.last_energy - energy;
        self.last_energy = energy;
        let converged = (0.0..self.cfg.stop_tol).contains(&decrease) || energy == 0.0;
        let last = converged || step == self.cfg.max_steps;

        if step.is_multiple_of(self.cfg.record_every) || last {
            let (error, snapshot) = observe()?;
            self.trace.steps.push(step);
            self.trace.energies.push(energy);
            self.trace.lane_errors.push(error);
            self.trace.snapshots.extend(snapshot);
            if energy > self.min_recorded * (1.0 + ENERGY_SLACK) + ENERGY_SLACK {
                self.rising += 1;
                if self.rising >= DIVERGENCE_PATIENCE {
                    return Err(self.divergence(step));
                }
            } else {
                self.rising = 0;
            }
            self.min_recorded = self.min_recorded.min(energy);
        }
        if converged {
            self.trace.converged = true;
            return Ok(Outcome::Converged);
        }
        Ok(Outcome::Continue)
    }

    fn divergence(&self, step: usize) -> Error {
        Error::Divergence {
            step,
            step_size: self.cfg.step_size,
            consecutive: self.rising.max(1),
        }
    }
}

/// Evolves an ELM field towards the ground truth field `gt`.
///
/// Each step adds `h·α·∇E(G_t - α·Ψ)` to `Ψ`, clamps to the Heaviside range
/// when configured, and optionally redistances by decoding and re-encoding.
pub fn evolve_implicit(
    psi_init: &Field2D,
    gt: &Field2D,
    mask: &RangeMask,
    cfg: &EvolutionConfig,
) -> Result<EvolutionTrace> {
    cfg.validate()?;
    let shape = gt.shape();
    shape.ensure_same(&psi_init.shape())?;
    let op = EieOperator::new(shape);
    let gt_lane = decode_lane(gt, mask)?;
    let width = shape.width();
    let observe = |psi: &Field2D, step: usize| -> Result<(f64, Option<Snapshot>)> {
        let lane = decode_lane(psi, mask)?;
        let error = lane_error(&lane, &gt_lane, width);
        let snapshot = cfg.keep_snapshots.then(|| Snapshot {
            step,
            psi: psi.clone(),
            lane,
        });
        Ok((error, snapshot))
    };

    let mut psi = psi_init.clone();
    let energy = op.energy(&difference_field(gt, &psi, cfg.eie)?)?;
    let (error, snapshot) = observe(&psi, 0)?;
    let mut rec = Recorder::new(cfg, energy, error, snapshot);

    for step in 1..=cfg.max_steps {
        let dir = op.descent_direction(gt, &psi, cfg.eie)?;
        let h = cfg.step_size;
        let clamp = cfg.clamp;
        psi = psi.zip_with(&dir, |v, d| {
            let next = v + h * d;
            if clamp {
                next.clamp(-0.5, 0.5)
            } else {
                next
            }
        })?;
        if cfg.reinit_every > 0 && step % cfg.reinit_every == 0 {
            psi = redistance(&psi, mask, cfg.heaviside)?;
        }
        let energy = op.energy(&difference_field(gt, &psi, cfg.eie)?)?;
        if let Outcome::Converged = rec.step(step, energy, || observe(&psi, step))? {
            break;
        }
    }
    let mut trace = rec.trace;
    trace.final_lane = Some(decode_lane(&psi, mask)?);
    Ok(trace)
}

/// Baseline run: gradient descent of the mean squared error between the
/// ground truth and `H_σ(φ) - 0.5`, taken with respect to the level set `φ`.
///
/// The step is applied per pixel, `φ ← φ - h·(w·h_grid)·∂MSE/∂φ`, so that
/// `step_size` does not depend on the grid size. Recorded energies are MSE
/// values; `cfg.eie`, `clamp` and `reinit_every` are ignored.
pub fn evolve_mse(
    phi_init: &Field2D,
    gt: &Field2D,
    mask: &RangeMask,
    cfg: &EvolutionConfig,
) -> Result<EvolutionTrace> {
    cfg.validate()?;
    let shape = gt.shape();
    shape.ensure_same(&phi_init.shape())?;
    let gt_lane = decode_lane(gt, mask)?;
    let width = shape.width();
    let p = cfg.heaviside;
    let to_psi = |phi: &Field2D| smoothed_heaviside(phi, p).map(|v| v - 0.5);
    let observe = |psi: &Field2D, step: usize| -> Result<(f64, Option<Snapshot>)> {
        let lane = decode_lane(psi, mask)?;
        let error = lane_error(&lane, &gt_lane, width);
        let snapshot = cfg.keep_snapshots.then(|| Snapshot {
            step,
            psi: psi.clone(),
            lane,
        });
        Ok((error, snapshot))
    };

    let mut phi = phi_init.clone();
    let mut psi = to_psi(&phi);
    let (error, snapshot) = observe(&psi, 0)?;
    let mut rec = Recorder::new(cfg, mse_energy(gt, &psi)?, error, snapshot);
    let h = cfg.step_size * shape.len() as f64;

    for step in 1..=cfg.max_steps {
        let grad = mse_gradient_wrt_phi(gt, &psi, &phi, p)?;
        phi = phi.zip_with(&grad, |v, g| v - h * g)?;
        psi = to_psi(&phi);
        let energy = mse_energy(gt, &psi)?;
        if let Outcome::Converged = rec.step(step, energy, || observe(&psi, step))? {
            break;
        }
    }
    let mut trace = rec.trace;
    trace.final_lane = Some(decode_lane(&psi, mask)?);
    Ok(trace)
}

/// Re-encodes the field from its decoded lane. The field is returned
/// unchanged when fewer than two rows decode.
pub fn redistance(psi: &Field2D, mask: &RangeMask, p: HeavisideParams) -> Result<Field2D> {
    let lane = decode_lane(psi, mask)?;
    if lane.valid_count() < 2 {
        return Ok(psi.clone());
    }
    Ok(encode_lane(&lane, psi.shape(), p)?.0)
}

/// Regularized curve delta: `1/(2σ)` within `σ` of the lane sample on each row.
#[derive(Debug, Clone, PartialEq)]
pub struct DeltaField(pub Field2D);

impl DeltaField {
    pub fn field(&self) -> &Field2D {
        &self.0
    }
}

pub fn delta_field(lane: &LanePolyline, sigma: f64, shape: GridShape) -> DeltaField {
    let height = 0.5 / sigma;
    DeltaField(Field2D::from_fn(shape, |x, y| match lane.x_at(y) {
        Some(xm) if (x as f64 - xm).abs() < sigma => height,
        _ => 0.0,
    }))
}

/// Bilinear interpolation with coordinates clamped to the grid.
pub fn sample_bilinear(f: &Field2D, x: f64, y: f64) -> f64 {
    let shape = f.shape();
    let x = x.clamp(0.0, (shape.width() - 1) as f64);
    let y = y.clamp(0.0, (shape.height() - 1) as f64);
    let (x0, y0) = (x.floor() as usize, y.floor() as usize);
    let x1 = (x0 + 1).min(shape.width() - 1);
    let y1 = (y0 + 1).min(shape.height() - 1);
    let (tx, ty) = (x - x0 as f64, y - y0 as f64);
    let top = f.get(x0, y0) * (1.0 - tx) + f.get(x1, y0) * tx;
    let bottom = f.get(x0, y1) * (1.0 - tx) + f.get(x1, y1) * tx;
    top * (1.0 - ty) + bottom * ty
}

/// Sideways velocity of each valid sample of `pred`.
///
/// The prediction is encoded with pixel-averaged Heaviside values, so the
/// energy is differentiable in the sample positions. Each velocity is the
/// spectral gradient of `G_t - α·Ψ_p` averaged against the regularized delta
/// around the sample (a `2σ` box convolved with the pixel footprint) and
/// negated. Returns the velocities and the energy of the current state.
pub fn explicit_velocity(
    op: &EieOperator,
    gt: &Field2D,
    pred: &LanePolyline,
    p: HeavisideParams,
    eie: EieParams,
) -> Result<(Vec<f64>, f64)> {
    let (psi, _) = encode_lane_pixel_averaged(pred, op.shape(), p)?;
    let d = difference_field(gt, &psi, eie)?;
    let grad = op.gradient(&d)?;
    let sigma = p.sigma();
    let velocity = pred
        .valid_points()
        .map(|(r, xm)| {
            let row = grad.row(r);
            let lo = (xm - sigma - 1.0).floor().max(0.0) as usize;
            let hi = ((xm + sigma + 1.0).ceil() as usize).min(row.len() - 1);
            -(lo..=hi)
                .map(|px| {
                    let phi = px as f64 - xm;
                    let weight = heaviside(phi + 0.5, sigma) - heaviside(phi - 0.5, sigma);
                    weight * row[px]
                })
                .sum::<f64>()
        })
        .collect();
    Ok((velocity, op.energy(&d)?))
}

/// Moves the samples of `x_init` sideways until they settle on `gt`.
///
/// Both lanes are encoded with [`encode_lane_pixel_averaged`]. Each step
/// evaluates [`explicit_velocity`] and applies `x ← x + h·α·v`. Samples leaving
/// the grid are clamped to the edge and the trace is flagged.
pub fn evolve_explicit(
    x_init: &LanePolyline,
    gt: &LanePolyline,
    shape: GridShape,
    cfg: &EvolutionConfig,
) -> Result<EvolutionTrace> {
    cfg.validate()?;
    let init_rows: Vec<usize> = x_init.valid_points().map(|(r, _)| r).collect();
    let gt_rows: Vec<usize> = gt.valid_points().map(|(r, _)| r).collect();
    if init_rows != gt_rows {
        return Err(Error::RowSetMismatch);
    }
    let op = EieOperator::new(shape);
    let (gt_field, _) = encode_lane_pixel_averaged(gt, shape, cfg.heaviside)?;
    let max_x = (shape.width() - 1) as f64;
    let a = cfg.eie.alpha();
    let width = shape.width();

    let snapshot = |lane: &LanePolyline, step: usize| -> Result<Option<Snapshot>> {
        if !cfg.keep_snapshots {
            return Ok(None);
        }
        let (psi, _) = encode_lane_pixel_averaged(lane, shape, cfg.heaviside)?;
        Ok(Some(Snapshot {
            step,
            psi,
            lane: lane.clone(),
        }))
    };

    let mut lane = LanePolyline::from_points(x_init.valid_points())?;
    let (mut velocity, energy) = explicit_velocity(&op, &gt_field, &lane, cfg.heaviside, cfg.eie)?;
    let mut rec = Recorder::new(
        cfg,
        energy,
        lane_error(&lane, gt, width),
        snapshot(&lane, 0)?,
    );
    let mut hit_boundary = false;

    for step in 1..=cfg.max_steps {
        let moved = lane.valid_points().zip(&velocity).map(|((r, x), v)| {
            let next = x + cfg.step_size * a * v;
            if !(0.0..=max_x).contains(&next) {
                hit_boundary = true;
            }
            (r, next.clamp(0.0, max_x))
        });
        lane = LanePolyline::from_points(moved.collect::<Vec<_>>())?;
        let (v, energy) = explicit_velocity(&op, &gt_field, &lane, cfg.heaviside, cfg.eie)?;
        velocity = v;
        let outcome = rec.step(step, energy, || {
            Ok((lane_error(&lane, gt, width), snapshot(&lane, step)?))
        })?;
        if let Outcome::Converged = outcome {
            break;
        }
    }
    let mut trace = rec.trace;
    trace.hit_boundary = hit_boundary;
    trace.final_lane = Some(lane);
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn shape(w: usize, h: usize) -> GridShape {
        GridShape::new(w, h).unwrap()
    }

    #[test]
    fn bilinear_sampling() {
        let f = Field2D::from_fn(shape(4, 4), |x, y| (x * x + 3 * y) as f64);
        assert_eq!(sample_bilinear(&f, 2.0, 1.0), f.get(2, 1));
        assert_eq!(
            sample_bilinear(&f, 1.5, 2.0),
            0.5 * (f.get(1, 2) + f.get(2, 2))
        );
        assert_eq!(sample_bilinear(&f, -3.0, 1.0), f.get(0, 1));
        assert_eq!(sample_bilinear(&f, 9.0, 9.0), f.get(3, 3));
    }

    #[test]
    fn delta_box_values() {
        let s = shape(32, 4);
        let lane = LanePolyline::from_points([(1, 12.0), (2, 12.0)]).unwrap();
        let delta = delta_field(&lane, 5.0, s);
        assert_eq!(delta.field().get(12, 1), 0.1);
        assert_eq!(delta.field().get(16, 1), 0.1);
        assert_eq!(delta.field().get(22, 1), 0.0);
        assert!(delta.field().row(0).iter().all(|&v| v == 0.0));
        let sum: f64 = delta.field().row(2).iter().sum();
        assert!((sum - 1.0).abs() <= 0.1 + 1e-12);
    }

    #[test]
    fn config_validation() {
        let bad = EvolutionConfig {
            step_size: 0.0,
            ..EvolutionConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = EvolutionConfig {
            max_steps: 0,
            ..EvolutionConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn implicit_is_stationary_at_ground_truth() {
        let s = shape(32, 16);
        let p = HeavisideParams::new(3.0).unwrap();
        let (gt, mask) = encode_lane(&LanePolyline::vertical(14.0, 16), s, p).unwrap();
        let cfg = EvolutionConfig {
            eie: EieParams::new(1.0).unwrap(),
            heaviside: p,
            ..EvolutionConfig::default()
        };
        let trace = evolve_implicit(&gt, &gt, &mask, &cfg).unwrap();
        assert!(trace.steps_taken <= 1);
        assert!(trace.energies.iter().all(|&e| e < 1e-12));
        assert!(trace.converged);
    }

    #[test]
    fn explicit_is_stationary_at_ground_truth() {
        let s = shape(32, 16);
        let gt = LanePolyline::vertical(14.0, 16);
        let cfg = EvolutionConfig {
            mode: EvolutionMode::Explicit,
            eie: EieParams::new(1.0).unwrap(),
            ..EvolutionConfig::default()
        };
        let trace = evolve_explicit(&gt, &gt, s, &cfg).unwrap();
        assert!(trace.energies.iter().all(|&e| e < 1e-12));
        assert_eq!(trace.final_lane.unwrap(), gt);
    }

    #[test]
    fn mse_baseline_runs() {
        let s = shape(32, 16);
        let p = HeavisideParams::new(3.0).unwrap();
        let gt_lane = LanePolyline::vertical(14.0, 16);
        let (gt, mask) = encode_lane(&gt_lane, s, p).unwrap();
        let cfg = EvolutionConfig {
            heaviside: p,
            max_steps: 50,
            ..EvolutionConfig::default()
        };
        let phi = crate::elm::build_level_set(&gt_lane, s).unwrap();
        let same = evolve_mse(&phi, &gt, &mask, &cfg).unwrap();
        assert!(same.energies.iter().all(|&e| e < 1e-20));

        // Overlapping bands: the MSE flow pulls the lane closer and lowers the error.
        let phi = crate::elm::build_level_set(&gt_lane.shifted(-4.0), s).unwrap();
        let near = evolve_mse(&phi, &gt, &mask, &cfg).unwrap();
        assert!(near.is_monotone(ENERGY_SLACK));
        assert!(near.final_energy().unwrap() < near.energies[0]);
    }

    #[test]
    fn explicit_rejects_row_mismatch() {
        let s = shape(32, 16);
        let gt = LanePolyline::vertical(14.0, 16);
        let short = LanePolyline::vertical(10.0, 12);
        let cfg = EvolutionConfig::default();
        assert_eq!(
            evolve_explicit(&short, &gt, s, &cfg),
            Err(Error::RowSetMismatch)
        );
    }

    #[test]
    fn lane_error_penalizes_missing_rows() {
        let gt = LanePolyline::vertical(10.0, 3);
        let pred = LanePolyline::new(vec![0, 1, 2], vec![Some(10.5), None, Some(9.0)]).unwrap();
        assert_eq!(lane_error(&pred, &gt, 40), 40.0);
        let pred = LanePolyline::from_points([(0, 10.5), (1, 10.0), (2, 9.0)]).unwrap();
        assert_eq!(lane_error(&pred, &gt, 40), 1.0);
    }
}
