//! Digital twin of a single-atom tweezer-array Ramsey magnetometer.
//!
//! The simulator produces shot records (site occupancy before and
//! detection after each Ramsey cycle); the estimator turns them into
//! per-site field shifts, gradients, resolution and sensitivity.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod array;
pub mod assembly;
pub mod config;
pub mod dataset;
pub mod engine;
pub mod error;
pub mod estimate;
pub mod fields;
pub mod physics;
pub mod rng;
pub mod units;

pub use error::{ArrayError, AssemblyError, ConfigError, DatasetError, FieldError, FitError};
