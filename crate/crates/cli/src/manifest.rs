use std::fs;
use std::path::{Path, PathBuf};

use cscavity_core::ExperimentConfig;
use serde::{Deserialize, Serialize};

use crate::args::Command;
use crate::error::{CliError, CliResult};

/// Record of one run, sufficient to reproduce its outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: Command,
    /// Fully resolved configuration, frequencies in Hz.
    pub config: Option<ExperimentConfig>,
    pub outputs: Vec<PathBuf>,
    pub version: String,
    pub wall_clock_seconds: f64,
}

impl RunManifest {
    pub fn path_for(out: &Path, command: &str) -> PathBuf {
        out.join(format!("{command}.manifest.json"))
    }

    pub fn write(&self, path: &Path) -> CliResult<()> {
        fs::write(path, serde_json::to_string_pretty(self)? + "\n").map_err(|e| CliError::at(path, e))
    }

    pub fn read(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::at(path, e))?;
        serde_json::from_str(&text).map_err(|e| CliError::at(path, e))
    }
}
