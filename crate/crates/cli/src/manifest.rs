use std::path::{Path, PathBuf};
use std::time::Instant;

use powertail::report::{sha256_hex, Artifact};
use powertail::{Error, Result};
use serde::Serialize;

#[derive(Debug, Serialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

/// Everything needed to rerun a command and check its outputs.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub options: serde_json::Value,
    pub inputs: Vec<InputDigest>,
    pub seed: Option<u64>,
    pub version: String,
    pub outputs: Vec<Artifact>,
    pub wall_clock_seconds: f64,
}

pub struct Recorder {
    command: String,
    options: serde_json::Value,
    seed: Option<u64>,
    inputs: Vec<InputDigest>,
    outputs: Vec<Artifact>,
    start: Instant,
}

impl Recorder {
    pub fn new(command: &str, options: impl Serialize, seed: Option<u64>) -> Self {
        Recorder {
            command: command.into(),
            options: serde_json::to_value(options).unwrap_or(serde_json::Value::Null),
            seed,
            inputs: Vec::new(),
            outputs: Vec::new(),
            start: Instant::now(),
        }
    }

    pub fn input(&mut self, path: &Path) -> Result<()> {
        let bytes = std::fs::read(path).map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        self.inputs.push(InputDigest {
            path: path.display().to_string(),
            sha256: sha256_hex(&bytes),
        });
        Ok(())
    }

    pub fn output(&mut self, path: &str, contents: &[u8]) {
        self.outputs.push(Artifact {
            path: path.into(),
            sha256: sha256_hex(contents),
            inputs: Vec::new(),
        });
    }

    pub fn outputs(&mut self, artifacts: impl IntoIterator<Item = Artifact>) {
        self.outputs.extend(artifacts);
    }

    pub fn finish(self, path: &Path) -> Result<PathBuf> {
        let manifest = RunManifest {
            command: self.command,
            options: self.options,
            inputs: self.inputs,
            seed: self.seed,
            version: env!("CARGO_PKG_VERSION").into(),
            outputs: self.outputs,
            wall_clock_seconds: self.start.elapsed().as_secs_f64(),
        };
        let mut buf = serde_json::to_vec_pretty(&manifest)?;
        buf.push(b'\n');
        std::fs::write(path, buf).map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        Ok(path.to_path_buf())
    }
}
