//! Command-line front end for the XL-MIMO grant-based random-access
//! simulator: configuration parsing, campaign and sweep orchestration, and
//! CSV/plot-data output.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

pub use error::CliError;
