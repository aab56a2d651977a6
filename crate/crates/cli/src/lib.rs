//! Command-line front end: key=value configuration, pole tables, decay
//! curves and parameter sweeps written as CSV with `.meta` sidecars.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

pub use config::{RunConfig, Target};
pub use error::CliError;
