//! Output directory bookkeeping: every written artifact is recorded and a
//! manifest ties them to the hash of the configuration that produced them.

use std::path::{Path, PathBuf};

use scentprompt::{Error, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;

pub struct Output {
    dir: PathBuf,
    artifacts: Vec<PathBuf>,
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    config_hash: String,
    config: &'a RunConfig,
    artifacts: Vec<String>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("artifact serializes");
    s.push('\n');
    s
}

impl Output {
    pub fn create(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            artifacts: Vec::new(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    /// Record an artifact written by someone else (e.g. checkpoints).
    pub fn record(&mut self, path: PathBuf) {
        if !self.artifacts.contains(&path) {
            self.artifacts.push(path);
        }
    }

    pub fn write(&mut self, name: &str, contents: &str) -> Result<PathBuf> {
        let path = self.path(name);
        std::fs::write(&path, contents).map_err(|e| Error::io(&path, e))?;
        self.record(path.clone());
        Ok(path)
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<PathBuf> {
        self.write(name, &to_json(value))
    }

    /// Writes `manifest-<command>.json`; no timestamps, so reruns match.
    pub fn finish(mut self, command: &str, config: &RunConfig) -> Result<PathBuf> {
        self.artifacts.sort();
        let manifest = Manifest {
            command,
            config_hash: sha256_hex(config.canonical_json().as_bytes()),
            config,
            artifacts: self
                .artifacts
                .iter()
                .map(|p| p.to_string_lossy().into_owned())
                .collect(),
        };
        let text = to_json(&manifest);
        let path = self.path(&format!("manifest-{command}.json"));
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }
}
