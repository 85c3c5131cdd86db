use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::CliError;

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: PathBuf,
    pub sha256: String,
    pub bytes: u64,
}

impl FileDigest {
    pub fn of(path: &Path) -> Result<Self, CliError> {
        let data = std::fs::read(path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
        Ok(Self {
            path: path.to_path_buf(),
            sha256: hex::encode(Sha256::digest(&data)),
            bytes: data.len() as u64,
        })
    }
}

/// Everything needed to regenerate a run: the resolved arguments, seeds and
/// input digests, plus digests of what was written. No timestamps, so
/// identical runs produce identical manifests.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: Value,
    pub seeds: BTreeMap<String, u64>,
    pub parameters: Option<Value>,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
    pub summary: Value,
}

impl Manifest {
    pub fn new(command: Value) -> Self {
        Self {
            tool: "reachcare".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command,
            seeds: BTreeMap::new(),
            parameters: None,
            inputs: Vec::new(),
            outputs: Vec::new(),
            summary: Value::Null,
        }
    }

    /// Inputs are recorded by absolute path.
    pub fn input(&mut self, path: &Path) -> Result<(), CliError> {
        let mut d = FileDigest::of(path)?;
        if let Ok(abs) = std::fs::canonicalize(path) {
            d.path = abs;
        }
        self.inputs.push(d);
        Ok(())
    }

    /// An output written outside the run directory, recorded by absolute path.
    pub fn output_path(&mut self, path: &Path) -> Result<(), CliError> {
        let mut d = FileDigest::of(path)?;
        if let Ok(abs) = std::fs::canonicalize(path) {
            d.path = abs;
        }
        self.outputs.push(d);
        Ok(())
    }

    /// Outputs are recorded relative to the run directory.
    pub fn output(&mut self, dir: &Path, name: &str) -> Result<(), CliError> {
        let mut d = FileDigest::of(&dir.join(name))?;
        d.path = PathBuf::from(name);
        self.outputs.push(d);
        Ok(())
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf, CliError> {
        let path = dir.join(MANIFEST);
        std::fs::write(&path, serde_json::to_string_pretty(self)?)?;
        Ok(path)
    }

    pub fn read(dir: &Path) -> Result<Self, CliError> {
        let path = dir.join(MANIFEST);
        let text =
            std::fs::read_to_string(&path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum DigestStatus {
    Ok,
    Changed,
    Missing,
}

/// Compares `d` with the file now on disk; relative paths resolve under `base`.
pub fn check(d: &FileDigest, base: &Path) -> DigestStatus {
    match FileDigest::of(&base.join(&d.path)) {
        Ok(now) if now.sha256 == d.sha256 => DigestStatus::Ok,
        Ok(_) => DigestStatus::Changed,
        Err(_) => DigestStatus::Missing,
    }
}
