//! Batch tools around the diversity-aware reward adjustment library:
//! completions ingestion, reward adjustment, reward/diversity correlation
//! analysis, toy training runs, timing, and synthetic datasets.

pub mod commands;
pub mod config;
pub mod error;
pub mod io;
pub mod output;

pub use error::{CliError, CliResult};
