//! File formats, experiment configuration and the `krf` command-line tool
//! built on [`krf_core`].

pub mod commands;
pub mod config;
pub mod error;
pub mod golden;
pub mod manifold;
pub mod output;

pub use commands::{cmd_predict, cmd_reproduce, cmd_run, cmd_sweep, SweepAxis};
pub use config::{ExperimentConfig, RunSpec, OUTPUT_DIR_ENV};
pub use error::CliError;
pub use manifold::{ManifoldSpec, Scalar};
