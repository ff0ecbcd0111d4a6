//! Command-line pipeline (`simulate`, `train`, `evaluate`) and the streaming
//! endpoint (`serve`) around `handface-core`.

pub mod commands;
pub mod config;
pub mod error;
pub mod serve;

pub use config::RunConfig;
pub use error::CliError;
