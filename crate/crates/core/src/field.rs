//! Real 2D scalar grids and their discrete Fourier transforms.
//!
//! Grids are periodic with unit pixel spacing. The forward transform carries
//! the `1/(w·h)` normalization and the inverse carries none, so a constant
//! field `c` has a single DC coefficient `c`.
//!
//! Frequencies use a signed layout: index `k` along an axis of length `len`
//! maps to `k` when `k < ⌈len/2⌉` and to `k - len` otherwise. For even
//! lengths the Nyquist mode lands on the negative side.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Minimum grid side length.
pub const MIN_SIDE: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct GridShape {
    width: usize,
    height: usize,
}

impl GridShape {
    pub fn new(width: usize, height: usize) -> Result<Self> {
        if width < MIN_SIDE || height < MIN_SIDE {
            return Err(Error::InvalidShape { width, height });
        }
        Ok(Self { width, height })
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    /// Pixel count.
    #[inline]
    pub fn len(&self) -> usize {
        self.width * self.height
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize) -> usize {
        debug_assert!(x < self.width && y < self.height);
        y * self.width + x
    }

    pub(crate) fn ensure_same(&self, other: &GridShape) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::ShapeMismatch {
                left: *self,
                right: *other,
            })
        }
    }
}

impl fmt::Display for GridShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.width, self.height)
    }
}

/// Signed frequency of storage index `k` on an axis of length `len`.
#[inline]
pub fn signed_frequency(k: usize, len: usize) -> i64 {
    if k < len.div_ceil(2) {
        k as i64
    } else {
        k as i64 - len as i64
    }
}

/// Storage index of signed frequency `m` (taken modulo `len`).
#[inline]
pub fn storage_index(m: i64, len: usize) -> usize {
    m.rem_euclid(len as i64) as usize
}

/// Real scalar field, row-major, every value finite.
#[derive(Debug, Clone, PartialEq)]
pub struct Field2D {
    shape: GridShape,
    values: Vec<f64>,
}

impl Field2D {
    pub fn new(shape: GridShape, values: Vec<f64>) -> Result<Self> {
        if values.len() != shape.len() {
            return Err(Error::ValueCount {
                expected: shape.len(),
                found: values.len(),
            });
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self { shape, values })
    }

    pub fn zeros(shape: GridShape) -> Self {
        Self::constant(shape, 0.0)
    }

    pub fn constant(shape: GridShape, value: f64) -> Self {
        assert!(value.is_finite());
        Self {
            shape,
            values: vec![value; shape.len()],
        }
    }

    /// Builds a field from `f(x, y)`. Panics if `f` returns a non-finite value.
    pub fn from_fn(shape: GridShape, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut values = Vec::with_capacity(shape.len());
        for y in 0..shape.height() {
            for x in 0..shape.width() {
                let v = f(x, y);
                assert!(v.is_finite(), "non-finite field value at ({x}, {y})");
                values.push(v);
            }
        }
        Self { shape, values }
    }

    #[inline]
    pub fn shape(&self) -> GridShape {
        self.shape
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[self.shape.index(x, y)]
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn row(&self, y: usize) -> &[f64] {
        let w = self.shape.width();
        &self.values[y * w..(y + 1) * w]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field2D {
        Field2D::from_fn(self.shape, |x, y| f(self.get(x, y)))
    }

    /// Pixel-wise combination of two fields of the same shape.
    pub fn zip_with(&self, other: &Field2D, f: impl Fn(f64, f64) -> f64) -> Result<Field2D> {
        self.shape.ensure_same(&other.shape)?;
        let values: Vec<f64> = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| f(a, b))
            .collect();
        Field2D::new(self.shape, values)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Cyclic translation: the value at `(x, y)` moves to `(x + dx, y + dy)`.
    pub fn roll(&self, dx: i64, dy: i64) -> Field2D {
        let (w, h) = (self.shape.width() as i64, self.shape.height() as i64);
        Field2D::from_fn(self.shape, |x, y| {
            let sx = (x as i64 - dx).rem_euclid(w) as usize;
            let sy = (y as i64 - dy).rem_euclid(h) as usize;
            self.get(sx, sy)
        })
    }
}

/// Complex frequency-domain coefficients, stored in FFT order.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    shape: GridShape,
    coefficients: Vec<Complex64>,
}

impl Spectrum {
    pub fn zeros(shape: GridShape) -> Self {
        Self {
            shape,
            coefficients: vec![Complex64::new(0.0, 0.0); shape.len()],
        }
    }

    /// Wraps coefficients laid out in FFT storage order (row-major over `n`, then `m`).
    pub fn from_storage(shape: GridShape, coefficients: Vec<Complex64>) -> Result<Self> {
        if coefficients.len() != shape.len() {
            return Err(Error::ValueCount {
                expected: shape.len(),
                found: coefficients.len(),
            });
        }
        Ok(Self {
            shape,
            coefficients,
        })
    }

    #[inline]
    pub fn shape(&self) -> GridShape {
        self.shape
    }

    /// Coefficient of signed mode `(m, n)`; indices wrap periodically.
    #[inline]
    pub fn coef(&self, m: i64, n: i64) -> Complex64 {
        self.coefficients[self.storage(m, n)]
    }

    pub fn set_coef(&mut self, m: i64, n: i64, value: Complex64) {
        let i = self.storage(m, n);
        self.coefficients[i] = value;
    }

    #[inline]
    fn storage(&self, m: i64, n: i64) -> usize {
        let kx = storage_index(m, self.shape.width());
        let ky = storage_index(n, self.shape.height());
        ky * self.shape.width() + kx
    }

    #[inline]
    pub fn as_storage(&self) -> &[Complex64] {
        &self.coefficients
    }

    /// Iterates `(m, n, coefficient)` over every mode.
    pub fn modes(&self) -> impl Iterator<Item = (i64, i64, Complex64)> + '_ {
        let (w, h) = (self.shape.width(), self.shape.height());
        self.coefficients
            .iter()
            .enumerate()
            .map(move |(i, &c)| (signed_frequency(i % w, w), signed_frequency(i / w, h), c))
    }

    /// Largest `|c(m,n) - conj(c(-m,-n))|` over all modes.
    pub fn hermitian_defect(&self) -> f64 {
        self.modes()
            .map(|(m, n, c)| (c - self.coef(-m, -n).conj()).norm())
            .fold(0.0, f64::max)
    }

    pub fn max_magnitude(&self) -> f64 {
        self.coefficients.iter().fold(0.0, |m, c| m.max(c.norm()))
    }
}

/// Per-mode magnitude `√(m² + n²)` over signed frequencies.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyKernel {
    shape: GridShape,
    magnitudes: Vec<f64>,
}

impl FrequencyKernel {
    /// Kernel with caller-chosen magnitudes in FFT storage order.
    pub fn from_magnitudes(shape: GridShape, magnitudes: Vec<f64>) -> Result<Self> {
        if magnitudes.len() != shape.len() {
            return Err(Error::ValueCount {
                expected: shape.len(),
                found: magnitudes.len(),
            });
        }
        if let Some(index) = magnitudes.iter().position(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self { shape, magnitudes })
    }

    #[inline]
    pub fn shape(&self) -> GridShape {
        self.shape
    }

    pub fn magnitude(&self, m: i64, n: i64) -> f64 {
        let kx = storage_index(m, self.shape.width());
        let ky = storage_index(n, self.shape.height());
        self.magnitudes[ky * self.shape.width() + kx]
    }

    #[inline]
    pub fn as_storage(&self) -> &[f64] {
        &self.magnitudes
    }

    pub fn max_magnitude(&self) -> f64 {
        self.magnitudes.iter().copied().fold(0.0, f64::max)
    }
}

pub fn frequency_kernel(shape: GridShape) -> FrequencyKernel {
    let (w, h) = (shape.width(), shape.height());
    let mut magnitudes = Vec::with_capacity(shape.len());
    for ky in 0..h {
        let n = signed_frequency(ky, h) as f64;
        for kx in 0..w {
            let m = signed_frequency(kx, w) as f64;
            magnitudes.push(m.hypot(n));
        }
    }
    FrequencyKernel { shape, magnitudes }
}

/// Relative imaginary residue above which an inverse transform is rejected.
pub const HERMITIAN_TOLERANCE: f64 = 1e-10;

/// Planned forward and inverse 2D FFTs for one grid shape.
///
/// Reuse a plan when transforming many fields of the same shape; the free
/// functions [`dft_forward`] and [`dft_inverse`] plan on every call.
#[derive(Clone)]
pub struct SpectralPlan {
    shape: GridShape,
    row_forward: Arc<dyn Fft<f64>>,
    row_inverse: Arc<dyn Fft<f64>>,
    col_forward: Arc<dyn Fft<f64>>,
    col_inverse: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for SpectralPlan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SpectralPlan")
            .field("shape", &self.shape)
            .finish_non_exhaustive()
    }
}

impl SpectralPlan {
    pub fn new(shape: GridShape) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            shape,
            row_forward: planner.plan_fft_forward(shape.width()),
            row_inverse: planner.plan_fft_inverse(shape.width()),
            col_forward: planner.plan_fft_forward(shape.height()),
            col_inverse: planner.plan_fft_inverse(shape.height()),
        }
    }

    #[inline]
    pub fn shape(&self) -> GridShape {
        self.shape
    }

    pub fn forward(&self, f: &Field2D) -> Result<Spectrum> {
        self.shape.ensure_same(&f.shape())?;
        let mut buf: Vec<Complex64> = f
            .as_slice()
            .iter()
            .map(|&v| Complex64::new(v, 0.0))
            .collect();
        self.transform(&mut buf, false);
        let scale = 1.0 / self.shape.len() as f64;
        buf.iter_mut().for_each(|c| *c *= scale);
        Spectrum::from_storage(self.shape, buf)
    }

    pub fn inverse(&self, s: &Spectrum) -> Result<Field2D> {
        self.shape.ensure_same(&s.shape())?;
        let mut buf = s.as_storage().to_vec();
        self.transform(&mut buf, true);
        let peak = buf.iter().fold(0.0, |m: f64, c| m.max(c.norm()));
        let imag = buf.iter().fold(0.0, |m: f64, c| m.max(c.im.abs()));
        if peak > 0.0 && imag > HERMITIAN_TOLERANCE * peak {
            return Err(Error::NonHermitian {
                residue: imag / peak,
            });
        }
        Field2D::new(self.shape, buf.into_iter().map(|c| c.re).collect())
    }

    fn transform(&self, buf: &mut [Complex64], inverse: bool) {
        let (w, h) = (self.shape.width(), self.shape.height());
        let (rows, cols) = if inverse {
            (&self.row_inverse, &self.col_inverse)
        } else {
            (&self.row_forward, &self.col_forward)
        };
        rows.process(buf);
        let mut transposed = transpose(buf, w, h);
        cols.process(&mut transposed);
        buf.copy_from_slice(&transpose(&transposed, h, w));
    }
}

fn transpose(src: &[Complex64], w: usize, h: usize) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); src.len()];
    for y in 0..h {
        for x in 0..w {
            out[x * h + y] = src[y * w + x];
        }
    }
    out
}

pub fn dft_forward(f: &Field2D) -> Spectrum {
    SpectralPlan::new(f.shape())
        .forward(f)
        .expect("plan shape matches field")
}

pub fn dft_inverse(s: &Spectrum) -> Result<Field2D> {
    SpectralPlan::new(s.shape()).inverse(s)
}
