use std::path::{Path, PathBuf};
use std::time::SystemTime;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::failure::{Failure, Outcome};

#[derive(Debug, Serialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

/// Provenance record written next to every run's outputs.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub subcommand: &'static str,
    pub config: serde_json::Value,
    pub inputs: Vec<InputDigest>,
    pub outputs: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub started_at: String,
    pub finished_at: String,
    #[serde(skip_serializing_if = "serde_json::Value::is_null")]
    pub summary: serde_json::Value,
}

pub fn digest_file(path: &Path) -> Outcome<InputDigest> {
    let bytes = std::fs::read(path)
        .map_err(|e| Failure::data(format!("cannot read {}: {e}", path.display())))?;
    Ok(InputDigest {
        path: path.display().to_string(),
        sha256: hex::encode(Sha256::digest(&bytes)),
    })
}

pub fn timestamp(t: SystemTime) -> String {
    humantime::format_rfc3339_seconds(t).to_string()
}

/// Outputs collected in memory and written only once the run has succeeded.
pub struct Staged {
    files: Vec<(PathBuf, Vec<u8>)>,
}

impl Staged {
    pub fn new() -> Self {
        Staged { files: Vec::new() }
    }

    pub fn add(&mut self, path: impl Into<PathBuf>, contents: impl Into<Vec<u8>>) {
        self.files.push((path.into(), contents.into()));
    }

    pub fn paths(&self) -> Vec<String> {
        self.files
            .iter()
            .map(|(p, _)| p.display().to_string())
            .collect()
    }

    /// Write every staged file atomically, then the manifest.
    pub fn commit(self, manifest_path: &Path, mut manifest: RunManifest) -> Outcome<()> {
        for (path, bytes) in &self.files {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)
                    .map_err(|e| Failure::data(format!("cannot create {}: {e}", dir.display())))?;
            }
            igl_core::io::write_atomic(path, bytes)?;
        }
        manifest.finished_at = timestamp(SystemTime::now());
        let json = serde_json::to_vec_pretty(&manifest).expect("manifest serializes");
        igl_core::io::write_atomic(manifest_path, &json)?;
        Ok(())
    }
}

/// `out/graph.csv` -> `out/graph.manifest.json`.
pub fn manifest_beside(output: &Path) -> PathBuf {
    let stem = output
        .file_stem()
        .map_or_else(|| "run".into(), |s| s.to_string_lossy().into_owned());
    output.with_file_name(format!("{stem}.manifest.json"))
}
