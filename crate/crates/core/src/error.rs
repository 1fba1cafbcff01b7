use thiserror::Error;

use crate::field::GridShape;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("grid {width}x{height} is too small (both sides must be at least 4)")]
    InvalidShape { width: usize, height: usize },

    #[error("field holds {found} values, grid needs {expected}")]
    ValueCount { expected: usize, found: usize },

    #[error("non-finite value at index {index}")]
    NonFinite { index: usize },

    #[error("shape mismatch: {left} vs {right}")]
    ShapeMismatch { left: GridShape, right: GridShape },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error(
        "spectrum is not Hermitian (imaginary residue {residue:.3e} relative to max magnitude)"
    )]
    NonHermitian { residue: f64 },

    #[error("lane has {valid_rows} usable rows, at least 2 required")]
    DegenerateLane { valid_rows: usize },

    #[error("{count} lanes exceed the capacity of {capacity} slots")]
    Capacity { count: usize, capacity: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("energy grew for {consecutive} consecutive recorded steps at step {step} (step size {step_size})")]
    Divergence {
        step: usize,
        step_size: f64,
        consecutive: usize,
    },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("prediction and ground truth are sampled on different rows")]
    RowSetMismatch,
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
