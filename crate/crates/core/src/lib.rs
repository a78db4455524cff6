//! Dynamically iterated Kalman filtering.
//!
//! The filters in [`dif`] iterate time update, measurement update and a
//! one-step Rauch–Tung–Striebel smoothing pass within each time step,
//! re-linearizing the transition about the smoothed previous state. Three
//! linearization flavours are provided: analytic Jacobians (DIEKF), mean-only
//! sigma-point regression (DIUKF) and full posterior linearization (DIPLF).
//!
//! [`oracle`] supplies dense-grid ground truth for scalar models and
//! [`bench`] runs the coordinated-turn Monte Carlo benchmark.

// `!(x <= y)` is used on purpose so that NaN fails range checks.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod cli;
pub mod dif;
pub mod error;
pub mod filters;
pub mod gaussian;
pub mod oracle;
pub mod slr;
pub mod ssm;

pub use dif::{dif_filter, dif_step, Algorithm, DifConfig, DifVariant, FilterRun, IterationTrace};
pub use error::{Error, Result};
pub use gaussian::Gaussian;
pub use slr::{AffineModel, SigmaConfig};
pub use ssm::{CtParams, StateSpaceModel};
