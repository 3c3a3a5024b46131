use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

/// Record of one command run, enough to replay it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub args: Vec<String>,
    pub seed: u64,
    pub config: serde_json::Value,
    pub config_file: Option<String>,
    pub tool_version: String,
    pub started_unix_s: f64,
    pub finished_unix_s: f64,
    pub outputs: Vec<String>,
}

pub fn unix_now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

impl RunManifest {
    pub fn start(command: &str, args: &[String], seed: u64) -> Self {
        Self {
            command: command.into(),
            args: args.to_vec(),
            seed,
            config: serde_json::Value::Null,
            config_file: None,
            tool_version: env!("CARGO_PKG_VERSION").into(),
            started_unix_s: unix_now(),
            finished_unix_s: 0.0,
            outputs: Vec::new(),
        }
    }

    /// Stamps the end time and writes the manifest through a rename so a
    /// reader never sees a partial file.
    pub fn finish(mut self, path: &Path, outputs: &[PathBuf]) -> Result<()> {
        self.outputs = outputs.iter().map(|p| p.display().to_string()).collect();
        self.finished_unix_s = unix_now();
        write_atomic(path, &(serde_json::to_string_pretty(&self)? + "\n"))
    }
}

pub fn write_atomic(path: &Path, text: &str) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, text).with_context(|| format!("cannot write {}", tmp.display()))?;
    fs::rename(&tmp, path).with_context(|| format!("cannot move into {}", path.display()))
}
