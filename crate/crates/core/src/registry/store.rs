//! On-disk layout:
//!
//! ```text
//! <root>/registry.json        schema_version, tool_version, season order
//! <root>/items.jsonl          one CorpusItem per line, append-only
//! <root>/seasons/<id>.json    one Season per file
//! ```
//!
//! Every file is replaced through a temp file and an atomic rename.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{CorpusItem, Registry, RegistryError, Season};
use crate::SCHEMA_VERSION;

pub const META_FILE: &str = "registry.json";
pub const ITEMS_FILE: &str = "items.jsonl";
pub const SEASONS_DIR: &str = "seasons";

#[derive(Debug, Serialize, Deserialize)]
struct Meta {
    schema_version: u32,
    tool_version: String,
    seasons: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct RegistryStore {
    root: PathBuf,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> RegistryError + '_ {
    move |source| RegistryError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn format_err(path: &Path, reason: impl ToString) -> RegistryError {
    RegistryError::Format {
        path: path.to_path_buf(),
        reason: reason.to_string(),
    }
}

fn atomic_write(path: &Path, bytes: &[u8]) -> Result<(), RegistryError> {
    let dir = path.parent().unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err(dir))?;
    tmp.write_all(bytes).map_err(io_err(path))?;
    tmp.as_file().sync_all().map_err(io_err(path))?;
    tmp.persist(path).map_err(|e| io_err(path)(e.error))?;
    Ok(())
}

fn safe_season_file(id: &str) -> Result<String, RegistryError> {
    if id.is_empty()
        || !id
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || "-_.".contains(c))
        || id.starts_with('.')
    {
        return Err(RegistryError::InvalidItem {
            id: id.into(),
            reason: "season ids may only contain ASCII letters, digits, '-', '_' and '.'".into(),
        });
    }
    Ok(format!("{id}.json"))
}

impl RegistryStore {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        RegistryStore { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn exists(&self) -> bool {
        self.root.join(META_FILE).is_file()
    }

    pub fn save(&self, reg: &Registry) -> Result<(), RegistryError> {
        let items_path = self.root.join(ITEMS_FILE);
        let existing = match fs::read_to_string(&items_path) {
            Ok(text) => text,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => String::new(),
            Err(e) => return Err(io_err(&items_path)(e)),
        };
        let stored = existing.lines().filter(|l| !l.trim().is_empty()).count();
        if stored > reg.items.len() {
            return Err(format_err(
                &items_path,
                "ledger holds items the registry does not",
            ));
        }
        let mut ledger = existing;
        if !ledger.is_empty() && !ledger.ends_with('\n') {
            ledger.push('\n');
        }
        for item in &reg.items[stored..] {
            ledger.push_str(&serde_json::to_string(item).expect("item serializes"));
            ledger.push('\n');
        }
        atomic_write(&items_path, ledger.as_bytes())?;

        for season in &reg.seasons {
            let path = self
                .root
                .join(SEASONS_DIR)
                .join(safe_season_file(&season.season_id)?);
            atomic_write(&path, season.to_json().as_bytes())?;
        }
        let meta = Meta {
            schema_version: SCHEMA_VERSION,
            tool_version: crate::TOOL_VERSION.into(),
            seasons: reg.seasons.iter().map(|s| s.season_id.clone()).collect(),
        };
        let meta_json = serde_json::to_string_pretty(&meta).expect("meta serializes") + "\n";
        atomic_write(&self.root.join(META_FILE), meta_json.as_bytes())
    }

    pub fn load(&self) -> Result<Registry, RegistryError> {
        let meta_path = self.root.join(META_FILE);
        let meta: Meta =
            serde_json::from_str(&fs::read_to_string(&meta_path).map_err(io_err(&meta_path))?)
                .map_err(|e| format_err(&meta_path, e))?;
        if meta.schema_version != SCHEMA_VERSION {
            return Err(format_err(
                &meta_path,
                format!("unsupported schema_version {}", meta.schema_version),
            ));
        }
        let items_path = self.root.join(ITEMS_FILE);
        let text = fs::read_to_string(&items_path).map_err(io_err(&items_path))?;
        let mut items = Vec::new();
        let mut index = BTreeMap::new();
        for (lineno, line) in text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
        {
            let item: CorpusItem = serde_json::from_str(line)
                .map_err(|e| format_err(&items_path, format!("line {}: {e}", lineno + 1)))?;
            item.validate()?;
            if index.insert(item.id.clone(), items.len()).is_some() {
                return Err(RegistryError::DuplicateId(item.id));
            }
            items.push(item);
        }
        let mut seasons = Vec::with_capacity(meta.seasons.len());
        for id in &meta.seasons {
            let path = self.root.join(SEASONS_DIR).join(safe_season_file(id)?);
            let season: Season =
                serde_json::from_str(&fs::read_to_string(&path).map_err(io_err(&path))?)
                    .map_err(|e| format_err(&path, e))?;
            if season.schema_version != SCHEMA_VERSION || &season.season_id != id {
                return Err(format_err(&path, "schema_version or season_id mismatch"));
            }
            for pid in season.active_pool.iter().chain(&season.staging_pool) {
                if !index.contains_key(pid) {
                    return Err(format_err(&path, format!("unknown item '{pid}'")));
                }
            }
            seasons.push(season);
        }
        if seasons.is_empty() {
            return Err(format_err(&meta_path, "no seasons recorded"));
        }
        Ok(Registry {
            items,
            index,
            seasons,
        })
    }
}
