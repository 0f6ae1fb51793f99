//! File formats, run configuration and the `vitcube` command-line pipeline
//! on top of [`vitcube_core`].

pub mod cli;
pub mod commands;
pub mod config;
pub mod error;
pub mod export;
pub mod manifest;
pub mod observations;

pub use error::CliError;
