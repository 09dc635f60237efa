//! Experiment harness for delay-beam channel priors.
//!
//! Configuration parsing, the GGCE binary container for datasets and
//! checkpoints, CSV and spectrum exports, a rayon-backed executor and the
//! subcommands behind the `dbprior` binary.

pub mod commands;
pub mod config;
pub mod container;
pub mod error;
pub mod parallel;
pub mod pipeline;
pub mod report;

pub use config::ExperimentConfig;
pub use error::{CliError, Result};
