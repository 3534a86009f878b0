//! Experiment orchestration for the `labelcraft` command-line tool.
//!
//! Commands read an [`config::ExperimentConfig`] (TOML plus flag overrides),
//! run the library pipeline and write artifacts into fresh timestamped
//! directories, each carrying the resolved config and a manifest.

pub mod commands;
pub mod config;
pub mod output;
pub mod pipeline;
pub mod variant;

pub use config::{ExperimentConfig, Method, Overrides};
pub use variant::Variant;
