//! Command-line harness: configuration and subcommand implementations.

pub mod config;
pub mod run;
