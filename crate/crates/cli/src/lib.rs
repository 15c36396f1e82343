//! Batch front end for the `mdicorr-core` engine.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod error;

pub use config::{load_config, parse_config, RunConfig};
pub use error::{CliError, Result};
