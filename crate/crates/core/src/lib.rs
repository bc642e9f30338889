//! Mortality-rate extrapolation with a recursive dense cell, life-table
//! analytics, and a stochastic population microsimulation of the pension
//! cost dependency ratio under alternative pension-age schemes and migration
//! scenarios.

pub mod data_io;
pub mod error;
pub mod forecaster;
pub mod life_metrics;
pub mod microsim;
pub mod neural;
pub mod parallel;
pub mod rng;
pub mod stats;

pub use error::{Error, ErrorClass, Result};
