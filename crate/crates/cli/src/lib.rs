//! Library surface of the command-line front end, exposed so the
//! integration tests can drive the commands in-process.

pub mod commands;
pub mod config;
pub mod csvout;

pub use commands::{cmd_analytic, cmd_figures, cmd_optimize, cmd_simulate, CliError};
pub use config::{apply_overrides, load_config, Overrides, RunConfig};
