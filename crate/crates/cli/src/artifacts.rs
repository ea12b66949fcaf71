//! Artifact writer: every file goes through here so the manifest lists it with its hash.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Default, Serialize, Deserialize)]
pub struct Manifest {
    /// Relative path to SHA-256 hex digest.
    pub files: BTreeMap<String, String>,
}

pub struct Artifacts {
    root: PathBuf,
    manifest: Manifest,
}

impl Artifacts {
    pub fn create(root: &Path) -> std::io::Result<Self> {
        fs::create_dir_all(root)?;
        Ok(Artifacts { root: root.to_path_buf(), manifest: Manifest::default() })
    }

    /// Reopens an artifact directory, keeping its existing manifest entries.
    pub fn open(root: &Path) -> std::io::Result<Self> {
        let manifest = match fs::read_to_string(root.join(MANIFEST)) {
            Ok(s) => serde_json::from_str(&s).map_err(std::io::Error::other)?,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Manifest::default(),
            Err(e) => return Err(e),
        };
        Ok(Artifacts { root: root.to_path_buf(), manifest })
    }

    pub fn manifest(&self) -> &Manifest {
        &self.manifest
    }

    pub fn write(&mut self, rel: &str, bytes: &[u8]) -> std::io::Result<()> {
        let path = self.root.join(rel);
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir)?;
        }
        fs::write(&path, bytes)?;
        self.manifest.files.insert(rel.to_string(), hex::encode(Sha256::digest(bytes)));
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, rel: &str, value: &T) -> std::io::Result<()> {
        let mut s = serde_json::to_string_pretty(value).map_err(std::io::Error::other)?;
        s.push('\n');
        self.write(rel, s.as_bytes())
    }

    pub fn finish(self) -> std::io::Result<Manifest> {
        let mut s = serde_json::to_string_pretty(&self.manifest).map_err(std::io::Error::other)?;
        s.push('\n');
        fs::write(self.root.join(MANIFEST), s)?;
        Ok(self.manifest)
    }
}
