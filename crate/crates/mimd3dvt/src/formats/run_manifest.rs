//! Per-run provenance record written next to every command's outputs.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const FILE_NAME: &str = "run_manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config: serde_json::Value,
    pub seed: Option<u64>,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    /// Path → SHA-256 of every input file and output file.
    pub checksums: BTreeMap<String, String>,
    pub duration_seconds: f64,
}

pub fn sha256_file(path: impl AsRef<Path>) -> Result<String> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(Error::io(path))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Accumulates inputs and outputs while a command runs.
#[derive(Debug)]
pub struct RunRecorder {
    command: String,
    seed: Option<u64>,
    config: serde_json::Value,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
    started: std::time::Instant,
}

impl RunRecorder {
    pub fn new(command: &str, seed: Option<u64>, config: serde_json::Value) -> Self {
        Self {
            command: command.to_string(),
            seed,
            config,
            inputs: Vec::new(),
            outputs: Vec::new(),
            started: std::time::Instant::now(),
        }
    }

    pub fn input(&mut self, path: impl Into<PathBuf>) {
        self.inputs.push(path.into());
    }

    pub fn output(&mut self, path: impl Into<PathBuf>) {
        self.outputs.push(path.into());
    }

    /// Hashes every recorded file and writes `run_manifest.json` into `dir`.
    pub fn finish(self, dir: impl AsRef<Path>) -> Result<RunManifest> {
        self.finish_at(dir.as_ref().join(FILE_NAME))
    }

    /// Manifest for a command whose primary output is the single file
    /// `output`: written next to it as `<output>.manifest.json`.
    pub fn finish_beside(self, output: impl AsRef<Path>) -> Result<RunManifest> {
        let mut name = output.as_ref().as_os_str().to_os_string();
        name.push(".manifest.json");
        self.finish_at(PathBuf::from(name))
    }

    pub fn finish_at(self, path: impl AsRef<Path>) -> Result<RunManifest> {
        let mut checksums = BTreeMap::new();
        for p in self.inputs.iter().chain(&self.outputs) {
            if p.is_file() {
                checksums.insert(p.display().to_string(), sha256_file(p)?);
            }
        }
        let manifest = RunManifest {
            command: self.command,
            config: self.config,
            seed: self.seed,
            inputs: self.inputs.iter().map(|p| p.display().to_string()).collect(),
            outputs: self.outputs.iter().map(|p| p.display().to_string()).collect(),
            checksums,
            duration_seconds: self.started.elapsed().as_secs_f64(),
        };
        super::write_json(path, &manifest)?;
        Ok(manifest)
    }
}
