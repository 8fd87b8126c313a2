//! File formats, configuration and report plumbing around `clozealign-core`.

pub mod config;
pub mod error;
pub mod formats;
pub mod pipeline;
pub mod report;

pub use error::{CliError, Result};
