//! Command-line front end for `segfuse-core`: probability map fusion,
//! post-processing, evaluation, fold splitting and a per-subject pipeline.

pub mod app;
pub mod commands;
pub mod error;
pub mod formats;
pub mod pipeline;

pub use app::{run, Cli};
pub use error::{CliError, CliResult};
