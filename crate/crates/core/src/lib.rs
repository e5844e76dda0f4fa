//! Staircase selective harmonic elimination (SHE) for cascaded H-bridge
//! multilevel inverters.
//!
//! * [`waveform`]: Fourier model of the staircase, RMS and sampling.
//! * [`problem`]: SHE residuals, weighted cost and THD metrics.
//! * [`solver`]: seeded particle swarm optimiser and a grid-search oracle.
//! * [`strategy`]: fixed-DC versus halved-DC operation and voltage sweeps.
//! * [`report`]: run configuration, result records and CSV tables.

pub mod error;
pub mod problem;
pub mod report;
pub mod solver;
pub mod strategy;
pub mod waveform;

pub use error::{Error, Result};
pub use problem::{thd_spectral, thd_total, Residuals, SheOptions, SheProblem};
pub use report::{RunConfig, SolveRecord};
pub use solver::{grid_oracle, solve, PsoParams, SolveResult};
pub use strategy::{Method, OperatingPoint, SweepRow, SweepTable};
pub use waveform::{InverterConfig, SwitchingAngles};
