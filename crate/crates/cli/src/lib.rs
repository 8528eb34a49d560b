//! Experiment runner for the `ecmimo` detectors.
//!
//! A run is described by an [`ExperimentConfig`] and produces a [`Table`]
//! written as CSV with `#` metadata lines: the experiment, build id, seed
//! and the fully resolved configuration. Feeding such a file back as the
//! configuration reproduces it.

pub mod config;
pub mod detector;
pub mod error;
pub mod runners;
pub mod table;

pub use config::{ExperimentConfig, ExperimentKind};
pub use detector::{DetectorKind, DetectorSpec};
pub use error::{CliError, Result};
pub use runners::{run, run_coded_ber, run_convergence_trace, run_free_energy_trace, run_rate_sweep};
pub use table::{Table, BUILD_ID};
