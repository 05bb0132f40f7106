//! Simulation, channel fitting and localization for a diffusive
//! molecular transmitter observed by absorbing receivers.

// Negated comparisons are used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
pub mod channel;
pub mod config;
pub mod error;
pub mod estimation;
pub mod experiments;
pub mod geometry;
pub mod lm;
pub mod localization;
pub mod scenario;
pub mod sim;
pub mod stats;
pub mod trace;

pub use error::{Error, Result};
pub use geometry::Vec3;
