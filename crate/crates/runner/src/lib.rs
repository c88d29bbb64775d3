//! Experiment runner for CE-SSLGAN and the SSL-GAN baseline: TOML
//! configs, multi-seed repetitions, parameter sweeps, CSV results and
//! JSON checkpoints.

pub mod checkpoint;
pub mod config;
pub mod dataset;
mod error;
pub mod exec;
pub mod experiment;
pub mod format;
pub mod stats;
pub mod sweep;

pub use error::{Result, RunError};
