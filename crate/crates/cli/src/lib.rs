//! Library surface of the `ailab` CLI so integration tests can drive the
//! subcommands directly.

pub mod commands;
pub mod config;
pub mod error;

pub use commands::{
    cmd_export_plots, cmd_gen_demos, cmd_oracle, cmd_sweep, cmd_train, oracle_battery, Overrides,
};
pub use config::ExperimentConfig;
pub use error::{CliError, Result};
