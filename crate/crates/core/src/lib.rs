//! Key rates for entanglement-based QKD with a parametric down-conversion
//! source: the exact multi-pair detection model, one-way and two-way
//! post-processing, finite-size corrections, brightness optimization and a
//! Monte Carlo cross-check.

pub mod comparison;
pub mod config;
pub mod error;
pub mod finite_key;
pub mod mc;
pub mod model;
pub mod optimize;
pub mod rates;
pub mod sweep;
pub mod twoway;

pub use error::{Error, Result};
