//! Run manifests: every command that writes artifacts also writes a manifest
//! describing exactly how to reproduce them. Manifests carry no timestamps
//! or machine state, so re-running the recorded command yields bit-identical
//! files.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sheforge_core::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    /// Full argument vector after the program name.
    pub argv: Vec<String>,
    pub seed: u64,
    pub outputs: Vec<PathBuf>,
}

impl RunManifest {
    pub fn new(command: &str, seed: u64, outputs: Vec<PathBuf>) -> Self {
        Self {
            tool: "sheforge".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            argv: std::env::args().skip(1).collect(),
            seed,
            outputs,
        }
    }

    /// Writes `<primary_output>.manifest.json`.
    pub fn write_alongside(&self, primary_output: &Path) -> Result<PathBuf> {
        let mut name = primary_output.file_name().unwrap_or_default().to_os_string();
        name.push(".manifest.json");
        let path = primary_output.with_file_name(name);
        let json = serde_json::to_string_pretty(self)
            .map_err(|e| Error::Format(format!("manifest serialization failed: {e}")))?;
        std::fs::write(&path, json + "\n")?;
        Ok(path)
    }
}
