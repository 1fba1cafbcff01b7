//! Elastic interaction energy and the companion loss terms.
//!
//! The energy of a difference field `D = G_t - α·Ψ_p` is evaluated in Fourier
//! space as `Σ √(m²+n²)·|d_mn|²`, where `d_mn` are the normalized DFT
//! coefficients of `D`. Its gradient is computed as the inverse transform of
//! `(√(m²+n²)/2)·d_mn`. That kernel is a fixed positive multiple of the exact
//! derivative of the discrete energy sum: see [`exact_gradient_scale`].

use serde::{Deserialize, Serialize};

use crate::elm::{heaviside_derivative, HeavisideParams};
use crate::error::{Error, Result};
use crate::field::{frequency_kernel, Field2D, FrequencyKernel, GridShape, SpectralPlan, Spectrum};

/// Probability clamp for every log-based loss.
pub const PROB_EPS: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EieParams {
    alpha: f64,
}

impl EieParams {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(Error::param(
                "alpha",
                format!("must be positive, got {alpha}"),
            ));
        }
        Ok(Self { alpha })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }
}

impl Default for EieParams {
    fn default() -> Self {
        Self { alpha: 0.5 }
    }
}

/// Weights of the total loss and of the two auxiliary heads.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub lambda_eie: f64,
    pub lambda_a: f64,
    pub lambda_r: f64,
    pub lambda_e: f64,
    pub aux_lambda1: f64,
    pub aux_lambda2: f64,
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        let named = [
            ("lambda_eie", self.lambda_eie),
            ("lambda_a", self.lambda_a),
            ("lambda_r", self.lambda_r),
            ("lambda_e", self.lambda_e),
            ("aux_lambda1", self.aux_lambda1),
            ("aux_lambda2", self.aux_lambda2),
        ];
        for (name, v) in named {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::param(name, format!("must be nonnegative, got {v}")));
            }
        }
        Ok(())
    }
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            lambda_eie: 1.0,
            lambda_a: 1.0,
            lambda_r: 0.1,
            lambda_e: 0.2,
            aux_lambda1: 0.3,
            aux_lambda2: 0.3,
        }
    }
}

/// Self energies of both curves and their interaction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub self_gt: f64,
    pub self_pred: f64,
    pub interaction: f64,
}

impl EnergyBreakdown {
    pub fn total(&self) -> f64 {
        self.self_gt + self.self_pred + self.interaction
    }
}

/// Planned transforms and frequency kernel for one grid shape.
#[derive(Debug, Clone)]
pub struct EieOperator {
    plan: SpectralPlan,
    kernel: FrequencyKernel,
}

impl EieOperator {
    pub fn new(shape: GridShape) -> Self {
        Self {
            plan: SpectralPlan::new(shape),
            kernel: frequency_kernel(shape),
        }
    }

    /// Operator with a caller-supplied kernel. Used to check that the
    /// verification suites catch a wrong kernel.
    pub fn with_kernel(kernel: FrequencyKernel) -> Self {
        Self {
            plan: SpectralPlan::new(kernel.shape()),
            kernel,
        }
    }

    pub fn shape(&self) -> GridShape {
        self.plan.shape()
    }

    pub fn kernel(&self) -> &FrequencyKernel {
        &self.kernel
    }

    pub fn plan(&self) -> &SpectralPlan {
        &self.plan
    }

    pub fn spectrum(&self, d: &Field2D) -> Result<Spectrum> {
        self.plan.forward(d)
    }

    pub fn energy(&self, d: &Field2D) -> Result<f64> {
        let s = self.plan.forward(d)?;
        Ok(self
            .kernel
            .as_storage()
            .iter()
            .zip(s.as_storage())
            .map(|(k, c)| k * c.norm_sqr())
            .sum())
    }

    pub fn bilinear(&self, a: &Field2D, b: &Field2D) -> Result<f64> {
        a.shape().ensure_same(&b.shape())?;
        let sa = self.plan.forward(a)?;
        let sb = self.plan.forward(b)?;
        Ok(self
            .kernel
            .as_storage()
            .iter()
            .zip(sa.as_storage().iter().zip(sb.as_storage()))
            .map(|(k, (ca, cb))| k * (ca.conj() * cb).re)
            .sum())
    }

    pub fn gradient(&self, d: &Field2D) -> Result<Field2D> {
        let s = self.plan.forward(d)?;
        let scaled: Vec<_> = s
            .as_storage()
            .iter()
            .zip(self.kernel.as_storage())
            .map(|(c, k)| c * (0.5 * k))
            .collect();
        self.plan
            .inverse(&Spectrum::from_storage(self.shape(), scaled)?)
    }

    /// `α·∇E(G_t - α·Ψ_p)`: adding a small positive multiple of this to `Ψ_p`
    /// lowers the energy.
    pub fn descent_direction(
        &self,
        gt: &Field2D,
        psi_p: &Field2D,
        p: EieParams,
    ) -> Result<Field2D> {
        let d = difference_field(gt, psi_p, p)?;
        let a = p.alpha();
        Ok(self.gradient(&d)?.map(|g| a * g))
    }
}

/// `D = G_t - α·Ψ_p`.
pub fn difference_field(gt: &Field2D, psi_p: &Field2D, p: EieParams) -> Result<Field2D> {
    let a = p.alpha();
    gt.zip_with(psi_p, |g, s| g - a * s)
}

pub fn eie_energy(d: &Field2D) -> f64 {
    EieOperator::new(d.shape())
        .energy(d)
        .expect("operator built for this shape")
}

/// Symmetric bilinear form `Q(a, b)` with `Q(d, d) = eie_energy(d)`.
pub fn eie_bilinear(a: &Field2D, b: &Field2D) -> Result<f64> {
    EieOperator::new(a.shape()).bilinear(a, b)
}

pub fn energy_breakdown(gt: &Field2D, psi_p: &Field2D, p: EieParams) -> Result<EnergyBreakdown> {
    gt.shape().ensure_same(&psi_p.shape())?;
    let op = EieOperator::new(gt.shape());
    let a = p.alpha();
    Ok(EnergyBreakdown {
        self_gt: op.bilinear(gt, gt)?,
        self_pred: a * a * op.bilinear(psi_p, psi_p)?,
        interaction: -2.0 * a * op.bilinear(gt, psi_p)?,
    })
}

pub fn eie_gradient(d: &Field2D) -> Field2D {
    EieOperator::new(d.shape())
        .gradient(d)
        .expect("symmetric kernel keeps the spectrum Hermitian")
}

pub fn descent_direction(gt: &Field2D, psi_p: &Field2D, p: EieParams) -> Result<Field2D> {
    EieOperator::new(gt.shape()).descent_direction(gt, psi_p, p)
}

/// Ratio between the exact derivative of [`eie_energy`] with respect to a
/// pixel of `D` and the value returned by [`eie_gradient`]: `4 / (w·h)`.
///
/// With the `1/(w·h)` forward normalization the exact derivative is
/// `(2/(w·h))·F⁻¹(√(m²+n²)·d_mn)`, while the gradient kernel carries `1/2`.
pub fn exact_gradient_scale(shape: GridShape) -> f64 {
    4.0 / shape.len() as f64
}

/// Largest step for which explicit descent along [`descent_direction`] keeps
/// the energy nonincreasing: `4 / (α²·k_max)`.
pub fn stable_step_bound(shape: GridShape, p: EieParams) -> f64 {
    let k_max = frequency_kernel(shape).max_magnitude();
    4.0 / (p.alpha() * p.alpha() * k_max)
}

/// Mean squared difference between the two fields.
pub fn mse_energy(gt: &Field2D, psi_p: &Field2D) -> Result<f64> {
    let diff = gt.zip_with(psi_p, |g, s| (g - s) * (g - s))?;
    Ok(diff.as_slice().iter().sum::<f64>() / gt.shape().len() as f64)
}

/// Derivative of [`mse_energy`] with respect to the prediction's level set,
/// through `Ψ_p = H_σ(φ_p) - 0.5`.
pub fn mse_gradient_wrt_phi(
    gt: &Field2D,
    psi_p: &Field2D,
    phi_p: &Field2D,
    p: HeavisideParams,
) -> Result<Field2D> {
    gt.shape().ensure_same(&phi_p.shape())?;
    let count = gt.shape().len() as f64;
    let residual = gt.zip_with(psi_p, |g, s| g - s)?;
    residual.zip_with(phi_p, |r, phi| {
        -2.0 * r * heaviside_derivative(phi, p.sigma()) / count
    })
}

fn clamp_prob(p: f64) -> f64 {
    p.clamp(PROB_EPS, 1.0 - PROB_EPS)
}

fn check_probs(probs: &[f64], labels: &[f64]) -> Result<()> {
    if probs.len() != labels.len() {
        return Err(Error::LengthMismatch {
            left: probs.len(),
            right: labels.len(),
        });
    }
    if probs.is_empty() {
        return Err(Error::param("probs", "empty"));
    }
    if let Some(i) = probs.iter().chain(labels).position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { index: i });
    }
    Ok(())
}

/// Mean binary cross-entropy of per-row lane presence.
pub fn range_bce(probs: &[f64], labels: &[f64]) -> Result<f64> {
    check_probs(probs, labels)?;
    let sum: f64 = probs
        .iter()
        .zip(labels)
        .map(|(&p, &y)| {
            let p = clamp_prob(p);
            y * p.ln() + (1.0 - y) * (1.0 - p).ln()
        })
        .sum();
    Ok(-sum / probs.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FocalParams {
    pub gamma: f64,
    pub alpha: f64,
}

impl Default for FocalParams {
    fn default() -> Self {
        Self {
            gamma: 2.0,
            alpha: 0.25,
        }
    }
}

/// Mean focal loss `-α·(1 - p_t)^γ·ln p_t` over lane slots.
pub fn focal_existence(probs: &[f64], labels: &[f64], f: FocalParams) -> Result<f64> {
    check_probs(probs, labels)?;
    let sum: f64 = probs
        .iter()
        .zip(labels)
        .map(|(&p, &y)| {
            let p = clamp_prob(p);
            let pt = if y >= 0.5 { p } else { 1.0 - p };
            -f.alpha * (1.0 - pt).powf(f.gamma) * pt.ln()
        })
        .sum();
    Ok(sum / probs.len() as f64)
}

/// Deep-supervision loss on the two intermediate predictions.
pub fn aux_loss(
    psi_p2: &Field2D,
    psi_p3: &Field2D,
    gt2: &Field2D,
    gt3: &Field2D,
    w: &LossWeights,
    p: EieParams,
) -> Result<f64> {
    let d2 = difference_field(gt2, psi_p2, p)?;
    let d3 = difference_field(gt3, psi_p3, p)?;
    let e2 = EieOperator::new(d2.shape()).energy(&d2)?;
    let e3 = EieOperator::new(d3.shape()).energy(&d3)?;
    Ok(w.aux_lambda1 * e2 + w.aux_lambda2 * e3)
}

pub fn total_loss(l_eie: f64, l_aux: f64, l_range: f64, l_exist: f64, w: &LossWeights) -> f64 {
    compensated_sum([
        w.lambda_eie * l_eie,
        w.lambda_a * l_aux,
        w.lambda_r * l_range,
        w.lambda_e * l_exist,
    ])
}

/// Neumaier summation.
fn compensated_sum(terms: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut carry = 0.0;
    for t in terms {
        let next = sum + t;
        carry += if sum.abs() >= t.abs() {
            (sum - next) + t
        } else {
            (t - next) + sum
        };
        sum = next;
    }
    sum + carry
}
