//! Command-line front end: TOML configuration, the on-disk dataset manifest,
//! model checkpoints and the subcommands.

pub mod checkpoint;
pub mod commands;
pub mod config;
pub mod manifest;

pub use commands::{run, Cli, Command};
pub use config::RunConfig;
