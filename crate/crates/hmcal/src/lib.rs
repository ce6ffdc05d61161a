//! Calibration engine for time-series-valued simulators.
//!
//! Solves the inverse problem "which input x makes the simulator output
//! match a target series" by fitting per-time-point Gaussian-process
//! surrogates, screening large candidate sets with an implausibility
//! criterion, iterating until no plausible candidates remain, and
//! extracting the evaluated point with the smallest full-series
//! discrepancy.

pub mod bundle;
pub mod design;
pub mod error;
pub mod histmatch;
pub mod linalg;
pub mod metrics;
pub mod rng;
pub mod sim;
pub mod surrogate;
pub mod sweep;

pub use error::{ConfigError, DomainError, FitError, HmError, MetricError, SimError};
pub use sim::{DesignPoint, InputBounds, SimulatorSpec, TimeGrid, TimeSeries};
