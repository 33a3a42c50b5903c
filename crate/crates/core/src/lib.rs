//! Grey-box thermal modeling of multi-zone buildings.
//!
//! A building description is turned into a bilinear RC state-space model
//! whose physical parameters are identified from excitation data. Internal
//! heat gains are estimated either as a fixed weekly profile or online from
//! the latest measurement, and both predictors are scored against data.

// Validation checks are written as `!(x > 0.0)` on purpose so NaN fails them.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod building;
pub mod error;
pub mod evaluation;
pub mod exec;
pub mod identification;
pub mod model;
pub mod params;
pub mod report;
pub mod simulation;
pub mod twin;

pub use building::BuildingDescription;
pub use error::{Error, Result};
pub use exec::Execution;
pub use params::{ParameterBounds, ParameterVector};
