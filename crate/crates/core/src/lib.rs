//! Estimation of the environmental footprint of training machine-learning
//! systems: GPU-hours from reported training metadata, embodied and usage
//! impacts (energy, GWP, ADPe) of the hardware, carbon-intensity scenarios,
//! and exponential trend fitting.

// `!(x > 0.0)` guards also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod catalog;
pub mod error;
pub mod estimation;
pub mod interval;
pub mod lca;
pub mod pipeline;
pub mod stats;
pub mod synth;
pub mod systems;

pub use error::{Error, Result};
pub use interval::EstimateInterval;
