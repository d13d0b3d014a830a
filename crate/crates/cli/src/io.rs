//! File readers and writers shared by the commands.

use std::fs;
use std::io::Write;
use std::path::Path;

use anyhow::{bail, Context};

use diagscore::registry::CorpusItem;
use diagscore::sampler::{synthetic_corpus, CorpusEntry};
use diagscore::scoring::WeightProfile;
use diagscore::Mode;

use crate::CorpusArgs;

/// Corpus items from a JSON object, a JSON array, or JSONL.
pub fn read_items(path: &Path, format: Option<&str>) -> anyhow::Result<Vec<CorpusItem>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let jsonl = match format {
        Some(f) => f == "jsonl",
        None => path.extension().is_some_and(|e| e == "jsonl"),
    };
    if jsonl {
        return text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'))
            .map(|(i, l)| {
                serde_json::from_str(l)
                    .with_context(|| format!("{} line {}", path.display(), i + 1))
            })
            .collect();
    }
    let value: serde_json::Value =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    if value.is_array() {
        serde_json::from_value(value).with_context(|| format!("items in {}", path.display()))
    } else {
        Ok(vec![
            serde_json::from_value(value).with_context(|| format!("item in {}", path.display()))?
        ])
    }
}

/// Sampler corpus: CSV `id,difficulty`, items filtered to `mode`, or a
/// synthetic draw.
pub fn read_corpus(args: &CorpusArgs, mode: Mode) -> anyhow::Result<Option<Vec<CorpusEntry>>> {
    if let Some(size) = args.synthetic {
        return Ok(Some(synthetic_corpus(
            size,
            args.mu,
            args.sigma,
            args.corpus_seed,
        )));
    }
    let Some(path) = &args.corpus else {
        return Ok(None);
    };
    if path.extension().is_some_and(|e| e == "csv") {
        let text =
            fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut out = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') || (i == 0 && line.starts_with("id")) {
                continue;
            }
            let (id, d) = line.split_once(',').with_context(|| {
                format!("{} line {}: expected id,difficulty", path.display(), i + 1)
            })?;
            let d: u32 = d
                .trim()
                .parse()
                .with_context(|| format!("{} line {}: bad difficulty", path.display(), i + 1))?;
            out.push(CorpusEntry::new(id.trim(), d));
        }
        return Ok(Some(out));
    }
    let items = read_items(path, None)?;
    Ok(Some(
        items
            .iter()
            .filter(|it| it.mode == mode)
            .map(CorpusItem::corpus_entry)
            .collect(),
    ))
}

/// `default`, `equal`, or a JSON weight-profile file.
pub fn resolve_weights(spec: &str) -> anyhow::Result<WeightProfile> {
    if let Some(w) = WeightProfile::by_name(spec) {
        return Ok(w);
    }
    let path = Path::new(spec);
    if !path.is_file() {
        bail!("unknown weight profile '{spec}' (expected default, equal, or a JSON file)");
    }
    let w: WeightProfile = serde_json::from_str(&fs::read_to_string(path)?)
        .with_context(|| format!("parsing weight profile {}", path.display()))?;
    w.validate()?;
    Ok(w)
}

/// Write to `path` through a temp file, or to stdout when `path` is `None`.
pub fn emit(path: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match path {
        Some(p) => write_atomic(p, text.as_bytes()),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> anyhow::Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.persist(path)
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

pub fn jsonl_header() -> String {
    format!(
        "# {} schema={}\n",
        diagscore::TOOL_VERSION,
        diagscore::SCHEMA_VERSION
    )
}
