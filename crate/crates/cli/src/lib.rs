//! Command-line pipelines: parameter derivation, spectra, rotation tables,
//! cancellation maps and spectrum fits. Every command writes a
//! `<command>.manifest.json` that `replay` re-runs byte-identically.

pub mod args;
pub mod commands;
pub mod error;
pub mod manifest;

pub use args::{Cli, Command};
pub use commands::run;
pub use error::{CliError, CliResult};
pub use manifest::RunManifest;

/// Environment variable holding the worker thread count.
pub const THREADS_ENV: &str = "CSCAVITY_THREADS";
