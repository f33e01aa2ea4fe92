//! Run manifest: every output file with its content hash, so runs can be
//! compared byte-for-byte.

use nucomplete::error::{Error, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};

#[derive(Serialize)]
struct ManifestEntry {
    path: String,
    bytes: usize,
    sha256: String,
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    files: Vec<ManifestEntry>,
}

/// Collects outputs under one directory and records them in the manifest.
pub struct OutputWriter {
    root: PathBuf,
    files: Vec<(String, usize, String)>,
}

impl OutputWriter {
    pub fn new(root: &Path) -> Result<Self> {
        std::fs::create_dir_all(root).map_err(|e| Error::io(root.display().to_string(), e))?;
        Ok(OutputWriter {
            root: root.to_path_buf(),
            files: Vec::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Write one file (relative to the output root) and record its hash.
    pub fn write(&mut self, rel: &str, contents: &str) -> Result<()> {
        let path = self.root.join(rel);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)
                .map_err(|e| Error::io(parent.display().to_string(), e))?;
        }
        std::fs::write(&path, contents).map_err(|e| Error::io(path.display().to_string(), e))?;
        let digest = Sha256::digest(contents.as_bytes());
        self.files
            .push((rel.to_string(), contents.len(), hex::encode(digest)));
        Ok(())
    }

    /// Write `run_manifest.json` listing everything produced so far.
    pub fn finish(mut self, command: &str) -> Result<()> {
        self.files.sort();
        let manifest = Manifest {
            command,
            files: self
                .files
                .iter()
                .map(|(path, bytes, sha256)| ManifestEntry {
                    path: path.clone(),
                    bytes: *bytes,
                    sha256: sha256.clone(),
                })
                .collect(),
        };
        let text = serde_json::to_string_pretty(&manifest)
            .map_err(|e| Error::Config(format!("manifest serialization: {e}")))?;
        let path = self.root.join("run_manifest.json");
        std::fs::write(&path, text).map_err(|e| Error::io(path.display().to_string(), e))
    }
}
