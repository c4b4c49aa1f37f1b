//! Run manifests: every run directory holds exactly one `manifest.json`
//! recording the command, the fully resolved configuration, seeds, input
//! paths and artifact hashes. Run directories are content-addressed by the
//! hash of the stable part of the manifest, so distinct configurations can
//! never silently overwrite each other and reruns land in the same place.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use lite_tsc::train::TrainConfig;

/// The hash-stable portion of a run manifest.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestCore {
    pub command: String,
    pub arch: String,
    pub dataset: String,
    /// SHA-256 of the dataset file bytes.
    pub dataset_sha256: String,
    pub train_config: TrainConfig,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub base_seed: Option<u64>,
}

/// The full manifest written to disk.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    #[serde(flatten)]
    pub core: ManifestCore,
    /// Seconds since the Unix epoch; excluded from the directory hash.
    pub created_unix: u64,
    /// SHA-256 per artifact file name; excluded from the directory hash.
    pub artifacts: BTreeMap<String, String>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    hex_string(&hasher.finalize())
}

fn hex_string(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(sha256_hex(&bytes))
}

impl ManifestCore {
    /// Stable hash of the resolved configuration; the run directory name.
    pub fn hash(&self) -> Result<String> {
        let json = serde_json::to_vec(self)?;
        Ok(sha256_hex(&json)[..12].to_string())
    }

    /// `<out>/<command>-<hash12>`.
    pub fn run_dir(&self, out: &Path) -> Result<PathBuf> {
        Ok(out.join(format!("{}-{}", self.command, self.hash()?)))
    }

    pub fn into_manifest(self, artifacts: BTreeMap<String, String>) -> RunManifest {
        let created_unix = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
        RunManifest { core: self, created_unix, artifacts }
    }
}

impl RunManifest {
    pub fn write(&self, dir: &Path) -> Result<()> {
        let json = serde_json::to_vec_pretty(self)?;
        lite_tsc::container::atomic_write(&dir.join("manifest.json"), &json)
            .with_context(|| format!("writing manifest under {}", dir.display()))
    }
}
