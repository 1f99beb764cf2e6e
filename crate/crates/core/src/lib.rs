//! Reconstruction of sparse causal networks linking a risk parameter to
//! macroeconomic time series.
//!
//! The structural model is a first-order vector autoregression with
//! contemporaneous effects,
//!
//! ```text
//! (I - Ψ) X_t = Φ X_{t-1} + b + ω_t
//! ```
//!
//! estimated row by row with a penalized (Lasso / Elastic-Net) least-squares
//! objective under a fixed pattern of structural zeros. Nonzero coefficients
//! become the edges of the reconstructed network.
//!
//! Module map:
//!
//! * [`panel`] ingestion, logit transform, standardization, lag-stacked design
//! * [`model`] constraint mask and coefficient container
//! * [`solver`] cyclic coordinate descent, objective, KKT certificate, λ path
//! * [`selection`] time-series cross-validation for λ and α
//! * [`graph`] extended / compact graphs, neighborhoods, cycles, DOT and CSV export
//! * [`importance`] standardized sensitivity scale of the risk parameter
//! * [`synth`] stationary simulation with known structure and recovery metrics
//! * [`cli`] the `stn` command-line front end

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod graph;
pub mod importance;
pub mod model;
pub mod panel;
pub mod selection;
pub mod solver;
pub mod synth;

pub use error::{Error, Result};
pub use graph::{GraphKind, StnGraph, StnNode};
pub use importance::{ImportanceScale, Normalization};
pub use model::{CoefficientSet, ConstraintMask};
pub use panel::{DesignMatrices, TimeSeriesPanel};
pub use selection::{CvResult, FoldPlan, FoldScheme};
pub use solver::{FitReport, SolverConfig};
pub use synth::{RecoveryMetrics, SynthSpec};
