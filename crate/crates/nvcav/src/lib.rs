//! Command-line front end for `nvcav-core`: TOML configuration, CSV
//! artifacts and atomic output.
//!
//! ```text
//! nvcav --config run.toml --out results modes
//! ```

// Config checks are written as `!(x > 0.0)` so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod error;
pub mod help;
pub mod output;

pub use error::CliError;
