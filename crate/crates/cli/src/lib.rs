//! File formats, trace writers and subcommands for the `dqtopo` binary.
//!
//! The numerical work lives in `dqtopo-core`; this crate reads configs and
//! instances from JSON, runs the core routines and writes CSV/JSONL traces.

pub mod cli;
pub mod commands;
pub mod error;
pub mod formats;
pub mod traces;

pub use error::{CliError, CliResult};
