//! Reproducible experiment runner: TOML configs in, CSV tables and a JSON
//! manifest out.

pub mod config;
pub mod error;
pub mod experiments;
pub mod output;
pub mod runner;
pub mod sweep;

pub use config::{Experiment, ExperimentConfig};
pub use error::CliError;
pub use output::{RunManifest, Table};
pub use runner::{resolve_out_dir, run};
pub use sweep::{child_config, child_seed, parse_value, sweep, SweepReport};
