//! Elastic Lane Maps: implicit lane fields whose zero contour is the lane.
//!
//! A lane sampled once per row is turned into a level set `φ(x, y) = x - x_y`
//! (the signed horizontal distance, negative on the lane's left), squashed
//! through a piecewise-linear Heaviside of half-width `σ`, and shifted so the
//! lane sits on `Ψ = 0` with `Ψ ∈ [-0.5, 0.5]`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{Field2D, GridShape};

/// Row-sampled lane: one optional x per row, rows strictly increasing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LanePolyline {
    rows: Vec<usize>,
    xs: Vec<Option<f64>>,
}

impl LanePolyline {
    pub fn new(rows: Vec<usize>, xs: Vec<Option<f64>>) -> Result<Self> {
        if rows.len() != xs.len() {
            return Err(Error::LengthMismatch {
                left: rows.len(),
                right: xs.len(),
            });
        }
        if let Some(i) = rows.windows(2).position(|w| w[0] >= w[1]) {
            return Err(Error::param(
                "rows",
                format!("not strictly increasing at position {}", i + 1),
            ));
        }
        if let Some(i) = xs
            .iter()
            .position(|x| matches!(x, Some(v) if !v.is_finite()))
        {
            return Err(Error::NonFinite { index: i });
        }
        Ok(Self { rows, xs })
    }

    /// Lane with a valid sample on every listed row.
    pub fn from_points(points: impl IntoIterator<Item = (usize, f64)>) -> Result<Self> {
        let (rows, xs): (Vec<_>, Vec<_>) = points.into_iter().map(|(r, x)| (r, Some(x))).unzip();
        Self::new(rows, xs)
    }

    /// Vertical lane at `x` covering rows `0..height`.
    pub fn vertical(x: f64, height: usize) -> Self {
        Self::from_points((0..height).map(|r| (r, x))).expect("vertical lane is well formed")
    }

    pub fn empty() -> Self {
        Self {
            rows: Vec::new(),
            xs: Vec::new(),
        }
    }

    pub fn rows(&self) -> &[usize] {
        &self.rows
    }

    pub fn xs(&self) -> &[Option<f64>] {
        &self.xs
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// `(row, x)` for every valid sample, top to bottom.
    pub fn valid_points(&self) -> impl DoubleEndedIterator<Item = (usize, f64)> + '_ {
        self.rows
            .iter()
            .zip(&self.xs)
            .filter_map(|(&r, x)| x.map(|x| (r, x)))
    }

    pub fn valid_count(&self) -> usize {
        self.xs.iter().filter(|x| x.is_some()).count()
    }

    pub fn x_at(&self, row: usize) -> Option<f64> {
        let i = self.rows.binary_search(&row).ok()?;
        self.xs[i]
    }

    /// x at the bottom-most (largest) valid row.
    pub fn bottom_x(&self) -> Option<f64> {
        self.valid_points().next_back().map(|(_, x)| x)
    }

    /// x at the top-most (smallest) valid row.
    pub fn top_x(&self) -> Option<f64> {
        self.valid_points().next().map(|(_, x)| x)
    }

    /// Adds `dx` to every valid sample.
    pub fn shifted(&self, dx: f64) -> Self {
        Self {
            rows: self.rows.clone(),
            xs: self.xs.iter().map(|x| x.map(|v| v + dx)).collect(),
        }
    }

    fn ensure_usable(&self) -> Result<()> {
        match self.valid_count() {
            n if n < 2 => Err(Error::DegenerateLane { valid_rows: n }),
            _ => Ok(()),
        }
    }
}

/// Per-row lane presence, one flag per grid row.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RangeMask(Vec<bool>);

impl RangeMask {
    pub fn new(flags: Vec<bool>) -> Self {
        Self(flags)
    }

    pub fn empty(height: usize) -> Self {
        Self(vec![false; height])
    }

    pub fn full(height: usize) -> Self {
        Self(vec![true; height])
    }

    /// True exactly on rows where `lane` has a valid sample.
    pub fn from_lane(lane: &LanePolyline, height: usize) -> Self {
        let mut flags = vec![false; height];
        for (r, _) in lane.valid_points() {
            if r < height {
                flags[r] = true;
            }
        }
        Self(flags)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_set(&self, row: usize) -> bool {
        self.0.get(row).copied().unwrap_or(false)
    }

    pub fn flags(&self) -> &[bool] {
        &self.0
    }

    pub fn set_rows(&self) -> impl DoubleEndedIterator<Item = usize> + '_ {
        self.0
            .iter()
            .enumerate()
            .filter(|(_, &f)| f)
            .map(|(r, _)| r)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeavisideParams {
    sigma: f64,
}

impl HeavisideParams {
    pub fn new(sigma: f64) -> Result<Self> {
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::param(
                "sigma",
                format!("must be positive, got {sigma}"),
            ));
        }
        Ok(Self { sigma })
    }

    /// Band width used for a grid with `rows` samples: 5 for 18-row grids, 3 otherwise.
    pub fn for_rows(rows: usize) -> Self {
        Self {
            sigma: if rows == 18 { 5.0 } else { 3.0 },
        }
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }
}

impl Default for HeavisideParams {
    fn default() -> Self {
        Self { sigma: 3.0 }
    }
}

#[inline]
pub fn heaviside(phi: f64, sigma: f64) -> f64 {
    if phi <= -sigma {
        0.0
    } else if phi >= sigma {
        1.0
    } else {
        0.5 * (1.0 + phi / sigma)
    }
}

/// Derivative of [`heaviside`]; zero on the saturated parts and at the kinks.
#[inline]
pub fn heaviside_derivative(phi: f64, sigma: f64) -> f64 {
    if phi.abs() < sigma {
        0.5 / sigma
    } else {
        0.0
    }
}

/// x used for every grid row: the lane's own sample, else the nearest valid row's.
fn row_positions(lane: &LanePolyline, shape: GridShape) -> Result<Vec<f64>> {
    lane.ensure_usable()?;
    let points: Vec<(usize, f64)> = lane.valid_points().collect();
    if let Some(&(r, _)) = points.iter().find(|(r, _)| *r >= shape.height()) {
        return Err(Error::param(
            "lane",
            format!("row {r} outside a grid of height {}", shape.height()),
        ));
    }
    let mut out = Vec::with_capacity(shape.height());
    let mut next = 0;
    for y in 0..shape.height() {
        while next < points.len() && points[next].0 < y {
            next += 1;
        }
        let x = match (next.checked_sub(1).map(|i| points[i]), points.get(next)) {
            (_, Some(&(r, x))) if r == y => x,
            (Some((ra, xa)), Some(&(rb, xb))) => {
                // Ties go to the row above.
                if y - ra <= rb - y {
                    xa
                } else {
                    xb
                }
            }
            (Some((_, xa)), None) => xa,
            (None, Some(&(_, xb))) => xb,
            (None, None) => unreachable!("lane has at least two valid rows"),
        };
        out.push(x);
    }
    Ok(out)
}

/// Signed horizontal distance to the lane, `φ(x, y) = x - x_y`.
pub fn build_level_set(lane: &LanePolyline, shape: GridShape) -> Result<Field2D> {
    let positions = row_positions(lane, shape)?;
    Ok(Field2D::from_fn(shape, |x, y| x as f64 - positions[y]))
}

pub fn smoothed_heaviside(phi: &Field2D, p: HeavisideParams) -> Field2D {
    phi.map(|v| heaviside(v, p.sigma()))
}

/// `Ψ = H_σ(φ) - 0.5` for a single phi value.
#[inline]
pub fn psi_of_phi(phi: f64, sigma: f64) -> f64 {
    heaviside(phi, sigma) - 0.5
}

/// Encodes a lane into its ELM field and the rows it covers.
pub fn encode_lane(
    lane: &LanePolyline,
    shape: GridShape,
    p: HeavisideParams,
) -> Result<(Field2D, RangeMask)> {
    let phi = build_level_set(lane, shape)?;
    let psi = phi.map(|v| psi_of_phi(v, p.sigma()));
    Ok((psi, RangeMask::from_lane(lane, shape.height())))
}

/// Antiderivative of [`heaviside`] vanishing at `-∞`.
#[inline]
fn heaviside_integral(t: f64, sigma: f64) -> f64 {
    if t <= -sigma {
        0.0
    } else if t >= sigma {
        t
    } else {
        (t + sigma) * (t + sigma) / (4.0 * sigma)
    }
}

/// `Ψ` averaged over the pixel `[φ - ½, φ + ½]` instead of sampled at its center.
#[inline]
pub fn pixel_averaged_psi(phi: f64, sigma: f64) -> f64 {
    heaviside_integral(phi + 0.5, sigma) - heaviside_integral(phi - 0.5, sigma) - 0.5
}

/// Like [`encode_lane`], but every pixel holds the mean of `Ψ` over its
/// footprint. The field is then continuously differentiable in the sub-pixel
/// lane positions, which the point-wise evolution relies on.
pub fn encode_lane_pixel_averaged(
    lane: &LanePolyline,
    shape: GridShape,
    p: HeavisideParams,
) -> Result<(Field2D, RangeMask)> {
    let phi = build_level_set(lane, shape)?;
    let psi = phi.map(|v| pixel_averaged_psi(v, p.sigma()));
    Ok((psi, RangeMask::from_lane(lane, shape.height())))
}

/// Rows whose step from the previous valid row exceeds the width of the
/// Heaviside band (`2σ` pixels). Row-wise decoding is unreliable there.
pub fn near_horizontal_rows(lane: &LanePolyline, p: HeavisideParams) -> Vec<usize> {
    let points: Vec<(usize, f64)> = lane.valid_points().collect();
    points
        .windows(2)
        .filter(|w| {
            let (r0, x0) = w[0];
            let (r1, x1) = w[1];
            (x1 - x0).abs() / (r1 - r0) as f64 > 2.0 * p.sigma()
        })
        .map(|w| w[1].0)
        .collect()
}

#[derive(Debug, Clone, Copy)]
struct Crossing {
    x: f64,
    slope: f64,
}

fn row_crossings(row: &[f64]) -> Vec<Crossing> {
    row.windows(2)
        .enumerate()
        .filter(|(_, w)| w[0] < 0.0 && w[1] >= 0.0)
        .map(|(i, w)| {
            let slope = w[1] - w[0];
            Crossing {
                x: i as f64 + (-w[0]) / slope,
                slope,
            }
        })
        .collect()
}

/// Decodes the lane as the negative-to-positive zero crossing of each masked row.
///
/// Rows are scanned bottom-up. With several crossings in a row the one closest
/// to the previously decoded x wins; before any row has been decoded the
/// steepest crossing wins. Rows without a crossing come back invalid.
pub fn decode_lane(psi: &Field2D, mask: &RangeMask) -> Result<LanePolyline> {
    let shape = psi.shape();
    if mask.len() != shape.height() {
        return Err(Error::LengthMismatch {
            left: mask.len(),
            right: shape.height(),
        });
    }
    let rows: Vec<usize> = mask.set_rows().collect();
    let mut xs = vec![None; rows.len()];
    let mut previous: Option<f64> = None;
    for (i, &y) in rows.iter().enumerate().rev() {
        let crossings = row_crossings(psi.row(y));
        let chosen = match previous {
            Some(px) => crossings
                .iter()
                .min_by(|a, b| (a.x - px).abs().total_cmp(&(b.x - px).abs())),
            None => crossings
                .iter()
                .rev()
                .max_by(|a, b| a.slope.total_cmp(&b.slope)),
        };
        if let Some(c) = chosen {
            xs[i] = Some(c.x);
            previous = Some(c.x);
        }
    }
    LanePolyline::new(rows, xs)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ElmSlot {
    pub psi: Field2D,
    pub exists: bool,
    pub range: RangeMask,
}

/// Fixed-capacity, ordered collection of per-lane ELM fields.
///
/// Existing lanes occupy a prefix of the slots; the rest hold zero fields.
#[derive(Debug, Clone, PartialEq)]
pub struct ElmStack {
    shape: GridShape,
    slots: Vec<ElmSlot>,
}

impl ElmStack {
    pub fn capacity(&self) -> usize {
        self.slots.len()
    }

    pub fn shape(&self) -> GridShape {
        self.shape
    }

    pub fn slots(&self) -> &[ElmSlot] {
        &self.slots
    }

    pub fn exists(&self) -> Vec<bool> {
        self.slots.iter().map(|s| s.exists).collect()
    }

    pub fn lane_count(&self) -> usize {
        self.slots.iter().filter(|s| s.exists).count()
    }
}

/// Sorts lanes left to right by their bottom-most x and encodes them into
/// the first slots of a stack of `capacity` slots.
///
/// Ties on the bottom x fall back to the top-most x, then to input order.
pub fn order_and_pad(
    lanes: &[LanePolyline],
    capacity: usize,
    shape: GridShape,
    p: HeavisideParams,
) -> Result<ElmStack> {
    if lanes.len() > capacity {
        return Err(Error::Capacity {
            count: lanes.len(),
            capacity,
        });
    }
    for lane in lanes {
        lane.ensure_usable()?;
    }
    let mut order: Vec<usize> = (0..lanes.len()).collect();
    let key = |i: usize| (lanes[i].bottom_x().unwrap(), lanes[i].top_x().unwrap());
    order.sort_by(|&a, &b| {
        let (ka, kb) = (key(a), key(b));
        ka.0.total_cmp(&kb.0).then(ka.1.total_cmp(&kb.1))
    });

    let mut slots = Vec::with_capacity(capacity);
    for i in order {
        let (psi, range) = encode_lane(&lanes[i], shape, p)?;
        slots.push(ElmSlot {
            psi,
            exists: true,
            range,
        });
    }
    slots.resize_with(capacity, || ElmSlot {
        psi: Field2D::zeros(shape),
        exists: false,
        range: RangeMask::empty(shape.height()),
    });
    Ok(ElmStack { shape, slots })
}

/// Default jump, in pixels, beyond which a row is treated as a departure point.
pub const DEPARTURE_THRESHOLD: f64 = 50.0;

/// Drops rows that jump sideways by more than `threshold` from the last kept row,
/// scanning from the bottom. The bottom-most valid row is always kept.
pub fn filter_departure_points(lane: &LanePolyline, threshold: f64) -> LanePolyline {
    let mut xs = lane.xs().to_vec();
    let mut last_kept: Option<f64> = None;
    for x in xs.iter_mut().rev() {
        let Some(v) = *x else { continue };
        match last_kept {
            Some(prev) if (v - prev).abs() > threshold => *x = None,
            _ => last_kept = Some(v),
        }
    }
    LanePolyline {
        rows: lane.rows().to_vec(),
        xs,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn shape(w: usize, h: usize) -> GridShape {
        GridShape::new(w, h).unwrap()
    }

    #[test]
    fn polyline_validation() {
        assert!(LanePolyline::new(vec![0, 1], vec![Some(1.0)]).is_err());
        assert!(LanePolyline::new(vec![2, 2], vec![Some(1.0), Some(2.0)]).is_err());
        assert!(LanePolyline::new(vec![0, 1], vec![Some(f64::INFINITY), None]).is_err());
        let lane = LanePolyline::new(vec![1, 4, 7], vec![Some(3.0), None, Some(5.0)]).unwrap();
        assert_eq!(lane.valid_count(), 2);
        assert_eq!(lane.bottom_x(), Some(5.0));
        assert_eq!(lane.top_x(), Some(3.0));
        assert_eq!(lane.x_at(4), None);
    }

    #[test]
    fn level_set_of_vertical_lane() {
        let phi = build_level_set(&LanePolyline::vertical(5.0, 16), shape(16, 16)).unwrap();
        for y in 0..16 {
            assert_eq!(phi.get(3, y), -2.0);
            assert_eq!(phi.get(5, y), 0.0);
        }
    }

    #[test]
    fn level_set_of_slanted_lane() {
        let lane = LanePolyline::from_points((0..8).map(|r| (r, r as f64))).unwrap();
        let phi = build_level_set(&lane, shape(8, 8)).unwrap();
        assert_eq!(phi.get(4, 2), 2.0);
        for r in 0..8 {
            assert_eq!(phi.get(r, r), 0.0);
        }
    }

    #[test]
    fn level_set_extends_nearest_row() {
        let lane = LanePolyline::from_points([(4, 10.0), (5, 11.0), (8, 20.0)]).unwrap();
        let phi = build_level_set(&lane, shape(32, 12)).unwrap();
        assert_eq!(phi.get(10, 0), 0.0);
        assert_eq!(phi.get(11, 6), 0.0); // row 6 is closer to row 5
        assert_eq!(phi.get(20, 7), 0.0);
        assert_eq!(phi.get(20, 11), 0.0);
    }

    #[test]
    fn level_set_rejects_degenerate_lanes() {
        let one = LanePolyline::from_points([(3, 4.0)]).unwrap();
        assert_eq!(
            build_level_set(&one, shape(8, 8)),
            Err(Error::DegenerateLane { valid_rows: 1 })
        );
        let outside = LanePolyline::from_points([(3, 4.0), (9, 4.0)]).unwrap();
        assert!(build_level_set(&outside, shape(8, 8)).is_err());
    }

    #[test]
    fn heaviside_values() {
        let s = 3.0;
        assert_eq!(heaviside(-s, s), 0.0);
        assert_eq!(heaviside(0.0, s), 0.5);
        assert_eq!(heaviside(s, s), 1.0);
        assert_eq!(heaviside(s / 2.0, s), 0.75);
        assert_eq!(heaviside(-100.0, s), 0.0);
        let mut last = 0.0;
        for i in -50..50 {
            let h = heaviside(i as f64 * 0.1, s);
            assert!(h >= last);
            last = h;
        }
        assert!(HeavisideParams::new(0.0).is_err());
        assert_eq!(HeavisideParams::for_rows(18).sigma(), 5.0);
        assert_eq!(HeavisideParams::for_rows(36).sigma(), 3.0);
    }

    #[test]
    fn encode_range_and_saturation() {
        let lane = LanePolyline::from_points((4..=12).map(|r| (r, 20.0))).unwrap();
        let (psi, mask) = encode_lane(&lane, shape(40, 16), HeavisideParams::default()).unwrap();
        let expected: Vec<bool> = (0..16).map(|r| (4..=12).contains(&r)).collect();
        assert_eq!(mask.flags(), expected.as_slice());
        for y in 0..16 {
            assert_eq!(psi.get(20, y), 0.0);
            assert_eq!(psi.get(0, y), -0.5);
            assert_eq!(psi.get(39, y), 0.5);
        }
        assert!(psi.as_slice().iter().all(|v| v.abs() <= 0.5));
    }

    #[test]
    fn pixel_averaged_encoding() {
        let s = 4.0;
        // Inside the ramp the average of a linear function is its center value.
        for phi in [-2.5, -1.0, 0.0, 0.7, 3.5] {
            assert!((pixel_averaged_psi(phi, s) - psi_of_phi(phi, s)).abs() < 1e-12);
        }
        assert_eq!(pixel_averaged_psi(-10.0, s), -0.5);
        assert_eq!(pixel_averaged_psi(10.0, s), 0.5);
        // Straddling the kink at φ = σ.
        let expected = 0.5 * (0.5 * (1.0 + 3.75 / 4.0)) + 0.5 - 0.5;
        assert!((pixel_averaged_psi(4.0, s) - expected).abs() < 1e-12);

        let lane = LanePolyline::vertical(9.3, 6);
        let (psi, mask) =
            encode_lane_pixel_averaged(&lane, shape(24, 6), HeavisideParams::new(s).unwrap())
                .unwrap();
        let decoded = decode_lane(&psi, &mask).unwrap();
        for (_, x) in decoded.valid_points() {
            assert!((x - 9.3).abs() < 1e-12);
        }
    }

    #[test]
    fn decode_interpolates_crossing() {
        let s = shape(4, 4);
        let psi = Field2D::from_fn(s, |x, _| [-0.5, -0.2, 0.1, 0.4][x]);
        let lane = decode_lane(&psi, &RangeMask::full(4)).unwrap();
        for (_, x) in lane.valid_points() {
            assert!((x - (1.0 + 0.2 / 0.3)).abs() < 1e-12);
        }
        assert_eq!(lane.valid_count(), 4);
    }

    #[test]
    fn decode_marks_rows_without_crossing() {
        let s = shape(4, 4);
        let psi = Field2D::from_fn(s, |x, y| if y == 2 { 0.3 } else { x as f64 * 0.2 - 0.3 });
        let lane = decode_lane(&psi, &RangeMask::full(4)).unwrap();
        assert_eq!(lane.x_at(2), None);
        assert_eq!(lane.valid_count(), 3);
        assert!(decode_lane(&psi, &RangeMask::full(5)).is_err());
    }

    #[test]
    fn decode_follows_previous_row_among_multiple_crossings() {
        // Two rising edges per row; the steep one at x≈3 seeds the bottom row,
        // then every row follows it even where the other edge is just as steep.
        let s = shape(16, 4);
        let psi = Field2D::from_fn(s, |x, y| {
            let x = x as f64;
            let edge_a = (x - 3.0).clamp(-0.5, 0.5);
            let gentle = if y == 3 { 0.1 } else { 0.5 };
            let edge_b = ((x - 11.0) * gentle).clamp(-0.5, 0.5);
            if x < 7.0 {
                edge_a
            } else {
                edge_b
            }
        });
        let lane = decode_lane(&psi, &RangeMask::full(4)).unwrap();
        for (_, x) in lane.valid_points() {
            assert!((x - 3.0).abs() < 1e-12, "decoded {x}");
        }
    }

    #[test]
    fn decode_is_translation_equivariant() {
        let s = shape(40, 12);
        let p = HeavisideParams::new(3.0).unwrap();
        let base = LanePolyline::vertical(12.3, 12);
        let (psi, mask) = encode_lane(&base, s, p).unwrap();
        let decoded = decode_lane(&psi, &mask).unwrap();
        for k in 1..6 {
            let shifted = decode_lane(&psi.roll(k, 0), &mask).unwrap();
            for ((_, a), (_, b)) in decoded.valid_points().zip(shifted.valid_points()) {
                assert_eq!(b - a, k as f64);
            }
        }
    }

    #[test]
    fn ordering_and_padding() {
        let s = shape(40, 16);
        let p = HeavisideParams::default();
        let lanes = [
            LanePolyline::vertical(30.0, 16),
            LanePolyline::vertical(10.0, 16),
        ];
        let stack = order_and_pad(&lanes, 4, s, p).unwrap();
        assert_eq!(stack.exists(), vec![true, true, false, false]);
        let first = decode_lane(&stack.slots()[0].psi, &stack.slots()[0].range).unwrap();
        assert_eq!(first.bottom_x(), Some(10.0));
        assert!(stack.slots()[3].psi.as_slice().iter().all(|&v| v == 0.0));

        let empty = order_and_pad(&[], 4, s, p).unwrap();
        assert_eq!(empty.lane_count(), 0);
        assert_eq!(empty.capacity(), 4);

        assert_eq!(
            order_and_pad(&lanes, 1, s, p),
            Err(Error::Capacity {
                count: 2,
                capacity: 1
            })
        );
    }

    #[test]
    fn ordering_ties_use_top_then_input_order() {
        let s = shape(40, 8);
        let p = HeavisideParams::default();
        let a = LanePolyline::from_points([(0, 30.0), (7, 20.0)]).unwrap();
        let b = LanePolyline::from_points([(0, 10.0), (7, 20.0)]).unwrap();
        let stack = order_and_pad(&[a.clone(), b.clone()], 3, s, p).unwrap();
        assert_eq!(stack.slots()[0].psi, encode_lane(&b, s, p).unwrap().0);
        let stack = order_and_pad(&[a.clone(), a.shifted(0.0)], 3, s, p).unwrap();
        assert_eq!(stack.lane_count(), 2);
    }

    fn lane_xs(xs: &[f64]) -> LanePolyline {
        LanePolyline::from_points(xs.iter().enumerate().map(|(i, &x)| (i, x))).unwrap()
    }

    #[test]
    fn departure_filter() {
        // Rows listed top to bottom; the bottom row (100) is scanned first.
        let lane = lane_xs(&[170.0, 104.0, 100.0]);
        let out = filter_departure_points(&lane, DEPARTURE_THRESHOLD);
        assert_eq!(out.xs(), &[None, Some(104.0), Some(100.0)]);

        let lane = lane_xs(&[120.0, 104.0, 100.0]);
        assert_eq!(filter_departure_points(&lane, DEPARTURE_THRESHOLD), lane);

        let out = filter_departure_points(&lane, 0.0);
        assert_eq!(out.valid_count(), 1);
        assert_eq!(out.bottom_x(), Some(100.0));
    }

    #[test]
    fn flags_near_horizontal_rows() {
        let lane = lane_xs(&[0.0, 2.0, 10.0, 11.0]);
        let p = HeavisideParams::new(3.0).unwrap();
        assert_eq!(near_horizontal_rows(&lane, p), vec![2]);
    }
}
