use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;

use crate::commands::CliError;
use crate::INTERFACE_VERSION;

/// Everything that determines a run, written next to its primary output as
/// `<output>.run.json`.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub subcommand: &'static str,
    pub seed: Option<u64>,
    pub out_path: Option<PathBuf>,
    /// Subcommand-specific parameters.
    pub params: Value,
    pub version: &'static str,
    pub interface: &'static str,
}

impl RunConfig {
    pub fn new(subcommand: &'static str, seed: Option<u64>, out_path: Option<&Path>, params: Value) -> Self {
        RunConfig {
            subcommand,
            seed,
            out_path: out_path.map(Path::to_path_buf),
            params,
            version: env!("CARGO_PKG_VERSION"),
            interface: INTERFACE_VERSION,
        }
    }

    pub fn sidecar_path(out: &Path) -> PathBuf {
        let mut name = out.as_os_str().to_owned();
        name.push(".run.json");
        PathBuf::from(name)
    }

    /// Writes the sidecar if the run has an output file; runs that print to
    /// stdout log nothing.
    pub fn log(&self) -> Result<(), CliError> {
        let Some(out) = &self.out_path else {
            return Ok(());
        };
        let path = Self::sidecar_path(out);
        let text = serde_json::to_string_pretty(self).map_err(|e| CliError::new("IO_ERROR", e.to_string()))?;
        std::fs::write(&path, text + "\n").map_err(|e| CliError::io(&path, e))
    }
}
