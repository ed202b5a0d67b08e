//! Command-line workflow and rating service for replica detection.

pub mod commands;
pub mod config;
pub mod error;
pub mod service;
pub mod slice;

pub use error::{CliError, CliResult};
