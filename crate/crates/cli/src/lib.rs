//! Batch front end: configuration, the synthetic flow generator and the
//! subcommand implementations behind the `qagnn` binary.

pub mod commands;
pub mod config;
pub mod synth;

pub use config::RunConfig;
