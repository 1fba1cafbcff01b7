//! Elastic Lane Maps and the elastic interaction energy.
//!
//! Lanes sampled once per row are encoded as implicit fields whose zero
//! contour is the lane. A prediction is scored against the ground truth with
//! a long-range quadratic energy evaluated through the FFT, whose gradient
//! drives a gradient-flow simulation of the prediction towards the ground
//! truth. Lane sets are scored with IoU/F1 and point-accuracy metrics.
//!
//! Modules, bottom up:
//! - [`field`]: grids, transforms, frequency kernel
//! - [`elm`]: lane encoding and decoding
//! - [`energy`]: energy, spectral gradient and loss terms
//! - [`evolve`]: implicit and explicit gradient flow
//! - [`metrics`]: lane matching and scoring
//! - [`dataio`]: annotation parsing and output formats
//! - [`verify`]: runtime checks of the spectral machinery

pub mod dataio;
pub mod elm;
pub mod energy;
mod error;
pub mod evolve;
pub mod field;
pub mod metrics;
pub mod verify;

pub use elm::{ElmStack, HeavisideParams, LanePolyline, RangeMask};
pub use energy::{EieParams, EnergyBreakdown, LossWeights};
pub use error::{Error, Result};
pub use evolve::{EvolutionConfig, EvolutionMode, EvolutionTrace};
pub use field::{Field2D, FrequencyKernel, GridShape, Spectrum};
pub use metrics::{DetectionMetrics, LaneSet, TusimpleMetrics};
