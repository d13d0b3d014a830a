//! On-disk judge response cache: `cache_dir/<sha256>.json`.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::SCHEMA_VERSION;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheEntry {
    pub schema_version: u32,
    pub key: String,
    pub image_sha256: String,
    pub model: String,
    pub instruction_sha256: String,
    pub responses: Vec<String>,
    pub timestamps: Vec<String>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Cache key for an (image, model, instruction) triple. Each component is
/// length-prefixed so distinct triples cannot share a preimage.
pub fn cache_key(image_sha256: &str, model: &str, instruction: &str) -> String {
    let mut h = Sha256::new();
    for part in [image_sha256, model, instruction] {
        h.update((part.len() as u64).to_le_bytes());
        h.update(part.as_bytes());
    }
    hex::encode(h.finalize())
}

#[derive(Debug, Clone)]
pub struct ResponseCache {
    dir: PathBuf,
}

impl ResponseCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        ResponseCache { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn path(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}.json"))
    }

    /// A missing or unreadable entry is a miss.
    pub fn get(&self, key: &str) -> Option<CacheEntry> {
        let bytes = fs::read(self.path(key)).ok()?;
        match serde_json::from_slice::<CacheEntry>(&bytes) {
            Ok(e) if e.key == key && e.schema_version == SCHEMA_VERSION => Some(e),
            Ok(_) => None,
            Err(err) => {
                log::warn!("ignoring corrupt cache entry {key}: {err}");
                None
            }
        }
    }

    /// Write through a temp file in the same directory, then rename.
    pub fn put(&self, entry: &CacheEntry) -> std::io::Result<()> {
        fs::create_dir_all(&self.dir)?;
        let mut tmp = tempfile::NamedTempFile::new_in(&self.dir)?;
        tmp.write_all(&serde_json::to_vec_pretty(entry).expect("cache entry serializes"))?;
        tmp.as_file().sync_all()?;
        tmp.persist(self.path(&entry.key)).map_err(|e| e.error)?;
        Ok(())
    }
}
