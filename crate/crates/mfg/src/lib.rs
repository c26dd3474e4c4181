//! Command-line front end for `mfg-core`: a JSON run configuration, five
//! commands (`solve`, `enumerate`, `select`, `burgers`, `check`) and the CSV
//! and JSON formats they write.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod error;
pub mod format;

pub use commands::{run, Command, Output, Overrides};
pub use config::LoadedConfig;
pub use error::{CliError, CliResult};
