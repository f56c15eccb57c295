//! Run manifests: what ran, on which bytes, and what it produced.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::Read;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::report::write_json;
use crate::trainer::{RunStatus, TrainConfig};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetFingerprint {
    pub role: String,
    pub path: PathBuf,
    pub sha256: String,
    pub bytes: u64,
}

impl DatasetFingerprint {
    pub fn of_file(role: &str, path: &Path) -> Result<Self> {
        let mut f = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut hasher = Sha256::new();
        let mut buf = vec![0u8; 1 << 16];
        let mut bytes = 0u64;
        loop {
            let n = f.read(&mut buf).map_err(|e| Error::io(path, e))?;
            if n == 0 {
                break;
            }
            hasher.update(&buf[..n]);
            bytes += n as u64;
        }
        Ok(Self {
            role: role.to_string(),
            path: path.to_path_buf(),
            sha256: hex::encode(hasher.finalize()),
            bytes,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ManifestStatus {
    Completed,
    StoppedEarly,
    Failed,
}

impl From<RunStatus> for ManifestStatus {
    fn from(s: RunStatus) -> Self {
        match s {
            RunStatus::Completed => ManifestStatus::Completed,
            RunStatus::StoppedEarly => ManifestStatus::StoppedEarly,
            RunStatus::Failed => ManifestStatus::Failed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub engine: String,
    pub command: String,
    pub status: ManifestStatus,
    pub error: Option<String>,
    pub config: Option<TrainConfig>,
    /// Merged settings; written alongside as a replayable `config.txt`.
    pub config_echo: BTreeMap<String, String>,
    pub datasets: Vec<DatasetFingerprint>,
    /// File names relative to the manifest's directory.
    pub artifacts: Vec<String>,
}

impl RunManifest {
    pub fn new(command: &str, config_echo: BTreeMap<String, String>) -> Self {
        Self {
            engine: format!("{} {}", env!("CARGO_PKG_NAME"), env!("CARGO_PKG_VERSION")),
            command: command.to_string(),
            status: ManifestStatus::Failed,
            error: None,
            config: None,
            config_echo,
            datasets: Vec::new(),
            artifacts: Vec::new(),
        }
    }

    pub fn add_artifact(&mut self, name: &str) {
        if !self.artifacts.iter().any(|a| a == name) {
            self.artifacts.push(name.to_string());
        }
    }

    /// Artifacts listed but absent from `dir`.
    pub fn missing_artifacts(&self, dir: &Path) -> Vec<String> {
        self.artifacts
            .iter()
            .filter(|a| !dir.join(a).is_file())
            .cloned()
            .collect()
    }

    /// Writes `manifest.json` into `dir`, refusing a successful manifest
    /// that lists files which do not exist.
    pub fn write(&self, dir: &Path) -> Result<()> {
        if self.status != ManifestStatus::Failed {
            let missing = self.missing_artifacts(dir);
            if !missing.is_empty() {
                return Err(Error::Consistency(format!("manifest lists missing artifacts: {}", missing.join(", "))));
            }
        }
        write_json(&dir.join(MANIFEST_FILE), self)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}
