//! Command-line front end: config files, output writers and the `tqs`
//! subcommands.

mod commands;
pub mod config;
pub mod output;

pub use commands::{run, sweep_stem, EXIT_CONFIG, EXIT_OK, EXIT_RUNTIME, EXIT_USAGE, THREADS_ENV};
