//! Experiment runner for mmloc: configs, subcommands and output bundles.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

pub use commands::{cmd_baseline, cmd_geodesic_demo, cmd_ingest, cmd_run, cmd_sweep, cmd_synth};
pub use config::{load_config, GeodesicDemoConfig, IngestConfig, RunConfig, SynthConfig};
pub use error::CliError;
