//! Run manifest written next to every command's outputs.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use serde_json::Value;

use rpo_core::corpus::io;

use crate::CliError;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub tool_version: String,
    pub seed: Option<u64>,
    /// Everything needed to rerun the command: its arguments and, for
    /// `gen`, the full resolved generator config.
    pub config: Value,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    pub wall_clock_seconds: f64,
    pub summary: Value,
}

pub struct ManifestBuilder {
    command: &'static str,
    started: Instant,
    seed: Option<u64>,
    config: Value,
    inputs: Vec<PathBuf>,
}

impl ManifestBuilder {
    pub fn start(command: &'static str, config: Value) -> Self {
        Self {
            command,
            started: Instant::now(),
            seed: None,
            config,
            inputs: Vec::new(),
        }
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn input(mut self, path: &Path) -> Self {
        self.inputs.push(path.to_path_buf());
        self
    }

    /// Writes `manifest.json` into `out` and returns the manifest.
    pub fn finish(self, out: &Path, outputs: Vec<PathBuf>, summary: Value) -> Result<RunManifest, CliError> {
        let manifest = RunManifest {
            command: self.command.to_string(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            seed: self.seed,
            config: self.config,
            inputs: self.inputs,
            outputs,
            wall_clock_seconds: self.started.elapsed().as_secs_f64(),
            summary,
        };
        io::write_json(&out.join(MANIFEST_FILE), &manifest).map_err(|e| CliError::Data(e.to_string()))?;
        Ok(manifest)
    }
}
