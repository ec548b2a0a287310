//! Library surface of the `urnsim` command-line tool: configuration loading
//! and the subcommand implementations, kept callable for integration tests.

pub mod commands;
pub mod config;

pub use commands::{
    apply_overrides, cmd_diagnose, cmd_fixed_points, cmd_print_defaults, cmd_simulate,
    cmd_verify, CmdError, EXIT_FAILURE, EXIT_INVALID, EXIT_OK,
};
pub use config::{ConfigError, ExperimentConfig};
