//! Probabilistic partial least squares: model definitions, classical and
//! likelihood-based estimators, and the simulation study harness.

// range checks are written `!(x > 0.0)` so that NaN fails them
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod classical;
pub mod em;
pub mod error;
pub mod linalg;
pub mod metrics;
pub mod model;
pub mod params_io;
pub mod stiefel;
pub mod study;

pub use error::{PplsError, Result};
pub use linalg::Mat;

/// Library version recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
