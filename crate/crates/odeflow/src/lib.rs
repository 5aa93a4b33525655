//! Experiment runner for the `odeflow-core` numerics: JSON configs,
//! CSV and binary outputs with a hashed manifest, and the `odeflow` CLI.

pub mod cli;
pub mod config;
pub mod error;
pub mod experiments;
pub mod formats;
pub mod manifest;
pub mod parallel;

pub use config::{ExperimentConfig, ExperimentKind};
pub use error::{Result, RunError};
