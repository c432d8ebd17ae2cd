//! Config parsing, run/sweep drivers and CSV/SVG output for the `fedpoison`
//! command-line tool.

pub mod config;
pub mod plot;
pub mod runner;

pub use config::{config_hash, parse_config, parse_config_str, ConfigError, RunConfig};
pub use runner::{cmd_run, cmd_sweep, RunManifest, RunOptions, SweepSpec};
