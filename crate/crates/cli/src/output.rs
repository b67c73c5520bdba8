//! Output directory bookkeeping and the hashed manifest.

use crate::error::{CliError, CliResult};
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, Serialize)]
pub struct ManifestEntry {
    pub path: String,
    pub bytes: usize,
    pub sha256: String,
}

/// Writes artifacts under one directory and remembers what was written.
pub struct OutputDir {
    root: PathBuf,
    /// Also write bulky per-trial fields.
    pub dump_fields: bool,
    entries: Vec<ManifestEntry>,
}

impl OutputDir {
    pub fn create(root: &Path) -> CliResult<Self> {
        std::fs::create_dir_all(root).map_err(|e| CliError::io(format!("cannot create output directory {}", root.display()), e))?;
        Ok(Self { root: root.to_path_buf(), dump_fields: false, entries: Vec::new() })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn write(&mut self, name: &str, contents: impl AsRef<[u8]>) -> CliResult<PathBuf> {
        let bytes = contents.as_ref();
        let path = self.root.join(name);
        std::fs::write(&path, bytes).map_err(|e| CliError::io(format!("cannot write {}", path.display()), e))?;
        let entry = ManifestEntry { path: name.to_string(), bytes: bytes.len(), sha256: hex::encode(Sha256::digest(bytes)) };
        match self.entries.iter_mut().find(|e| e.path == name) {
            Some(old) => *old = entry,
            None => self.entries.push(entry),
        }
        Ok(path)
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> CliResult<PathBuf> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Numeric(format!("cannot serialize {name}: {e}")))?;
        text.push('\n');
        self.write(name, text)
    }

    /// Writes `manifest.json` listing every other output, sorted by path.
    pub fn finish(mut self) -> CliResult<Vec<ManifestEntry>> {
        self.entries.sort_by(|a, b| a.path.cmp(&b.path));
        let entries = self.entries.clone();
        self.write_json(MANIFEST, &serde_json::json!({ "files": entries }))?;
        Ok(entries)
    }
}
