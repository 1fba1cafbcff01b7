//! Runtime self-checks: FFT against a direct DFT sum, and the spectral
//! gradient against central finite differences of the energy.

use std::f64::consts::TAU;

use num_complex::Complex64;
use serde::Serialize;

use crate::energy::{eie_energy, exact_gradient_scale, EieOperator};
use crate::error::{Error, Result};
use crate::field::{
    dft_forward, dft_inverse, signed_frequency, Field2D, FrequencyKernel, GridShape, Spectrum,
};

pub const ORACLE_TOLERANCE: f64 = 1e-9;
pub const ROUND_TRIP_TOLERANCE: f64 = 1e-12;
pub const COSINE_TOLERANCE: f64 = 1e-6;
pub const SCALE_TOLERANCE: f64 = 1e-6;
pub const FD_STEP: f64 = 1e-3;

/// Forward transform by direct summation, `O((w·h)²)`.
pub fn naive_dft(f: &Field2D) -> Spectrum {
    let shape = f.shape();
    let (w, h) = (shape.width(), shape.height());
    let norm = 1.0 / shape.len() as f64;
    let mut out = Vec::with_capacity(shape.len());
    for ky in 0..h {
        for kx in 0..w {
            let mut acc = Complex64::new(0.0, 0.0);
            for y in 0..h {
                for x in 0..w {
                    // Reduce the phase index first to keep the angle small.
                    let px = (kx * x % w) as f64 / w as f64;
                    let py = (ky * y % h) as f64 / h as f64;
                    acc += Complex64::from_polar(f.get(x, y), -TAU * (px + py));
                }
            }
            out.push(acc * norm);
        }
    }
    Spectrum::from_storage(shape, out).expect("storage matches shape")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OracleReport {
    pub fields: usize,
    pub max_forward_error: f64,
    pub max_round_trip_error: f64,
}

impl OracleReport {
    pub fn passed(&self) -> bool {
        self.max_forward_error < ORACLE_TOLERANCE
            && self.max_round_trip_error < ROUND_TRIP_TOLERANCE
    }
}

/// Compares the FFT path with [`naive_dft`] and checks the inverse round trip.
pub fn dft_oracle_check(fields: &[Field2D]) -> Result<OracleReport> {
    let mut report = OracleReport {
        fields: fields.len(),
        max_forward_error: 0.0,
        max_round_trip_error: 0.0,
    };
    for f in fields {
        let fast = dft_forward(f);
        let slow = naive_dft(f);
        let fwd = fast
            .as_storage()
            .iter()
            .zip(slow.as_storage())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        let back = dft_inverse(&fast)?;
        let rt = back
            .as_slice()
            .iter()
            .zip(f.as_slice())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        report.max_forward_error = report.max_forward_error.max(fwd);
        report.max_round_trip_error = report.max_round_trip_error.max(rt);
    }
    Ok(report)
}

/// `|Σ f² − w·h·Σ |d|²|` relative to `Σ f²`.
pub fn parseval_defect(f: &Field2D) -> f64 {
    let space: f64 = f.as_slice().iter().map(|v| v * v).sum();
    let freq: f64 = dft_forward(f)
        .as_storage()
        .iter()
        .map(|c| c.norm_sqr())
        .sum();
    let scaled = freq * f.shape().len() as f64;
    if space == 0.0 {
        scaled
    } else {
        ((space - scaled) / space).abs()
    }
}

/// Central-difference derivative of [`eie_energy`] with respect to each pixel.
pub fn finite_difference_gradient(d: &Field2D, step: f64) -> Field2D {
    let shape = d.shape();
    let mut values = d.as_slice().to_vec();
    let mut grad = Vec::with_capacity(values.len());
    for i in 0..values.len() {
        let orig = values[i];
        values[i] = orig + step;
        let plus = eie_energy(&Field2D::new(shape, values.clone()).expect("finite"));
        values[i] = orig - step;
        let minus = eie_energy(&Field2D::new(shape, values.clone()).expect("finite"));
        values[i] = orig;
        grad.push((plus - minus) / (2.0 * step));
    }
    Field2D::new(shape, grad).expect("finite differences are finite")
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradientReport {
    pub fields: usize,
    pub min_cosine_similarity: f64,
    /// Least-squares factor mapping the spectral gradient onto the
    /// finite-difference one, averaged over fields.
    pub mean_scale: f64,
    /// Largest relative deviation of a per-field scale from the mean.
    pub scale_spread: f64,
    pub expected_scale: f64,
}

impl GradientReport {
    pub fn passed(&self) -> bool {
        self.fields > 0
            && self.min_cosine_similarity > 1.0 - COSINE_TOLERANCE
            && self.scale_spread < SCALE_TOLERANCE
    }
}

/// Checks `op.gradient` against finite differences of the reference energy.
pub fn gradient_check(op: &EieOperator, fields: &[Field2D], step: f64) -> Result<GradientReport> {
    let mut cosines = Vec::with_capacity(fields.len());
    let mut scales = Vec::with_capacity(fields.len());
    for d in fields {
        d.shape().ensure_same(&op.shape())?;
        let g = op.gradient(d)?;
        let fd = finite_difference_gradient(d, step);
        let dot: f64 = g
            .as_slice()
            .iter()
            .zip(fd.as_slice())
            .map(|(a, b)| a * b)
            .sum();
        let gg: f64 = g.as_slice().iter().map(|a| a * a).sum();
        let ff: f64 = fd.as_slice().iter().map(|a| a * a).sum();
        if gg == 0.0 || ff == 0.0 {
            return Err(Error::InvalidParameter {
                name: "fields",
                reason: "gradient vanishes; use non-constant fields".into(),
            });
        }
        cosines.push(dot / (gg.sqrt() * ff.sqrt()));
        scales.push(dot / gg);
    }
    let mean_scale = scales.iter().sum::<f64>() / scales.len().max(1) as f64;
    let scale_spread = scales
        .iter()
        .map(|s| ((s - mean_scale) / mean_scale).abs())
        .fold(0.0, f64::max);
    Ok(GradientReport {
        fields: fields.len(),
        min_cosine_similarity: cosines.iter().copied().fold(f64::INFINITY, f64::min),
        mean_scale,
        scale_spread,
        expected_scale: exact_gradient_scale(op.shape()),
    })
}

/// Kernel with `|m| + |n|` in place of `√(m²+n²)`: a deliberately wrong
/// operator that the gradient check must reject.
pub fn corrupted_kernel(shape: GridShape) -> FrequencyKernel {
    let (w, h) = (shape.width(), shape.height());
    let magnitudes = (0..h)
        .flat_map(|ky| {
            (0..w).map(move |kx| {
                (signed_frequency(kx, w).abs() + signed_frequency(ky, h).abs()) as f64
            })
        })
        .collect();
    FrequencyKernel::from_magnitudes(shape, magnitudes).expect("valid magnitudes")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn field(shape: GridShape, seed: u64) -> Field2D {
        // Small LCG; enough variety for unit tests.
        let mut s = seed
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        Field2D::from_fn(shape, |_, _| {
            s = s
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            (s >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        })
    }

    #[test]
    fn oracle_agrees() {
        let shape = GridShape::new(8, 6).unwrap();
        let fields: Vec<_> = (0..5).map(|s| field(shape, s)).collect();
        let r = dft_oracle_check(&fields).unwrap();
        assert!(r.passed(), "{r:?}");
    }

    #[test]
    fn parseval() {
        let f = field(GridShape::new(8, 8).unwrap(), 3);
        assert!(parseval_defect(&f) < 1e-12);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let shape = GridShape::new(8, 8).unwrap();
        let fields: Vec<_> = (0..3).map(|s| field(shape, s)).collect();
        let r = gradient_check(&EieOperator::new(shape), &fields, FD_STEP).unwrap();
        assert!(r.passed(), "{r:?}");
        assert!(((r.mean_scale - r.expected_scale) / r.expected_scale).abs() < 1e-6);
    }

    #[test]
    fn corrupted_kernel_is_rejected() {
        let shape = GridShape::new(8, 8).unwrap();
        let fields: Vec<_> = (0..3).map(|s| field(shape, s)).collect();
        let op = EieOperator::with_kernel(corrupted_kernel(shape));
        assert!(!gradient_check(&op, &fields, FD_STEP).unwrap().passed());
    }

    #[test]
    fn constant_field_is_rejected() {
        let shape = GridShape::new(4, 4).unwrap();
        let op = EieOperator::new(shape);
        assert!(gradient_check(&op, &[Field2D::constant(shape, 0.3)], FD_STEP).is_err());
    }
}
