//! Output files and the run manifest.

use std::path::PathBuf;
use std::time::Instant;

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::CliError;

#[derive(Debug, Serialize)]
pub struct OutputFile {
    pub path: String,
    pub sha256: String,
    pub bytes: usize,
}

#[derive(Debug, Serialize)]
pub struct Timing {
    pub stage: String,
    pub seconds: f64,
}

/// Collects outputs, timings and warnings for one invocation.
pub struct Run {
    dir: PathBuf,
    command: &'static str,
    config: RunConfig,
    env_overrides: Vec<String>,
    pub resolved: serde_json::Map<String, Value>,
    timings: Vec<Timing>,
    pub warnings: Vec<String>,
    outputs: Vec<OutputFile>,
}

impl Run {
    pub fn new(command: &'static str, config: RunConfig, env_overrides: Vec<String>) -> Result<Self, CliError> {
        let dir = config.output.dir.clone();
        std::fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
        Ok(Run {
            dir,
            command,
            config,
            env_overrides,
            resolved: Default::default(),
            timings: Vec::new(),
            warnings: Vec::new(),
            outputs: Vec::new(),
        })
    }

    pub fn config(&self) -> &RunConfig {
        &self.config
    }

    pub fn config_mut(&mut self) -> &mut RunConfig {
        &mut self.config
    }

    /// Runs `f`, recording its wall time under `stage`.
    pub fn timed<T>(&mut self, stage: &str, f: impl FnOnce() -> T) -> T {
        let t = Instant::now();
        let out = f();
        self.timings.push(Timing { stage: stage.to_string(), seconds: t.elapsed().as_secs_f64() });
        out
    }

    pub fn resolve(&mut self, key: &str, value: impl Serialize) {
        self.resolved.insert(key.to_string(), serde_json::to_value(value).expect("serializable"));
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf, CliError> {
        let path = self.dir.join(name);
        std::fs::write(&path, bytes).map_err(|e| CliError::io(&path, e))?;
        self.outputs.push(OutputFile {
            path: name.to_string(),
            sha256: hex_digest(bytes),
            bytes: bytes.len(),
        });
        Ok(path)
    }

    pub fn write_json(&mut self, name: &str, value: &impl Serialize) -> Result<PathBuf, CliError> {
        let mut text = serde_json::to_vec_pretty(value).expect("serializable");
        text.push(b'\n');
        self.write(name, &text)
    }

    /// Writes `manifest.json`; the manifest itself is not digested.
    pub fn finish(self) -> Result<PathBuf, CliError> {
        let manifest = serde_json::json!({
            "software": { "name": env!("CARGO_PKG_NAME"), "version": env!("CARGO_PKG_VERSION") },
            "command": self.command,
            "config": self.config,
            "env_overrides": self.env_overrides,
            "resolved": self.resolved,
            "timings": self.timings,
            "warnings": self.warnings,
            "outputs": self.outputs,
        });
        let path = self.dir.join("manifest.json");
        let mut text = serde_json::to_vec_pretty(&manifest).expect("serializable");
        text.push(b'\n');
        std::fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
        Ok(path)
    }
}

pub fn hex_digest(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}
