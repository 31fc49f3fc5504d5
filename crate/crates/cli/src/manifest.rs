//! Run manifest: what a pipeline produced and how the run went.
//!
//! The manifest echoes the configuration, lists every artifact with its
//! checksum, and carries timings, solver outcomes and the final
//! metrics. Checksums cover exact file bytes; the CSV and PGM writers
//! emit no timestamps, so reruns with the same seed produce the same
//! sums. Wall clock timings are the one intentionally nondeterministic
//! part.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut out = String::with_capacity(64);
    for b in digest {
        let _ = write!(out, "{b:02x}");
    }
    out
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ArtifactEntry {
    pub file: String,
    pub kind: String,
    pub sha256: String,
    /// Value mapped to black, image artifacts only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min: Option<f64>,
    /// Value mapped to white, image artifacts only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveSummary {
    pub stage: String,
    pub converged: bool,
    pub iterations: usize,
    pub rel_residual: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub pipeline: String,
    pub method: String,
    pub grid: crate::config::GridSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phantom_id: Option<String>,
    pub seed: u64,
    /// "ok", or "failed: reason" when the pipeline aborted after
    /// producing partial artifacts.
    pub status: String,
    pub config: serde_json::Value,
    pub timings_s: BTreeMap<String, f64>,
    pub solves: Vec<SolveSummary>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
    pub metrics: serde_json::Map<String, serde_json::Value>,
    pub artifacts: Vec<ArtifactEntry>,
}

impl RunManifest {
    pub fn file_name() -> &'static str {
        "manifest.json"
    }

    pub fn write(&self, dir: &Path) -> std::io::Result<PathBuf> {
        let path = dir.join(Self::file_name());
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        std::fs::write(&path, text)?;
        Ok(path)
    }

    pub fn read(dir: &Path) -> Result<Self, String> {
        let path = dir.join(Self::file_name());
        let text = std::fs::read_to_string(&path)
            .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
        serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
    }

    /// Recomputes every artifact checksum against the files on disk.
    pub fn verify_artifacts(&self, dir: &Path) -> Result<(), String> {
        for a in &self.artifacts {
            let path = dir.join(&a.file);
            let bytes = std::fs::read(&path)
                .map_err(|e| format!("missing artifact {}: {e}", path.display()))?;
            let sum = sha256_hex(&bytes);
            if sum != a.sha256 {
                return Err(format!("checksum mismatch for {}", a.file));
            }
        }
        Ok(())
    }

    pub fn metric(&self, key: &str) -> Option<f64> {
        self.metrics.get(key).and_then(|v| v.as_f64())
    }
}
