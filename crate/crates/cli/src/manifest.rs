//! Run manifests: written next to every output, replayable to the same bytes.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::jobs::{Job, OutFile};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputRecord {
    pub file: String,
    pub bytes: usize,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: Option<u64>,
    pub job: Job,
    pub outputs: Vec<OutputRecord>,
    pub notes: Vec<String>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

impl RunManifest {
    pub fn new(job: &Job, files: &[OutFile]) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: job.name().to_string(),
            seed: job.seed(),
            job: job.clone(),
            outputs: files
                .iter()
                .map(|f| OutputRecord {
                    file: f.name.clone(),
                    bytes: f.bytes.len(),
                    sha256: sha256_hex(&f.bytes),
                })
                .collect(),
            notes: job.notes(),
        }
    }

    pub fn file_name(&self) -> String {
        format!("{}.manifest.json", self.command)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing manifest {}", path.display()))
    }
}

/// Writes the files and their manifest into `dir`; returns the paths written.
pub fn write_outputs(dir: &Path, job: &Job, files: &[OutFile]) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut written = Vec::new();
    for f in files {
        let path = dir.join(&f.name);
        std::fs::write(&path, &f.bytes).with_context(|| format!("writing {}", path.display()))?;
        written.push(path);
    }
    let manifest = RunManifest::new(job, files);
    let path = dir.join(manifest.file_name());
    let mut text = serde_json::to_vec_pretty(&manifest)?;
    text.push(b'\n');
    std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
    written.push(path);
    Ok(written)
}

/// Per-output comparison of a replay against the recorded digests.
pub struct ReplayCheck {
    pub file: String,
    pub identical: bool,
}

pub fn compare(manifest: &RunManifest, files: &[OutFile]) -> Result<Vec<ReplayCheck>> {
    if manifest.outputs.len() != files.len() {
        bail!(
            "manifest lists {} outputs, replay produced {}",
            manifest.outputs.len(),
            files.len()
        );
    }
    Ok(manifest
        .outputs
        .iter()
        .zip(files)
        .map(|(rec, f)| ReplayCheck {
            file: rec.file.clone(),
            identical: rec.file == f.name && rec.sha256 == sha256_hex(&f.bytes),
        })
        .collect())
}
