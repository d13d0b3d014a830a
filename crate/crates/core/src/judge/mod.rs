//! Client for external vision-language judges.
//!
//! The gateway sends a fixed instruction plus a PNG raster, repeats the call
//! `runs` times, parses the trailing number of each reply and averages. Raw
//! replies are cached on disk by `(sha256(image), model, instruction)`, so a
//! warm cache makes scoring fully offline and reproducible.

mod cache;
mod transport;

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use cache::{cache_key, sha256_hex, CacheEntry, ResponseCache};
#[cfg(feature = "http")]
pub use transport::HttpTransport;
pub use transport::{
    ChatCompletionsAdapter, JudgeAdapter, JudgeRequest, JudgeTransport, TransportError,
};

use crate::SCHEMA_VERSION;

/// Design-error counting instruction, sent verbatim.
pub const DESIGN_ERROR_INSTRUCTION: &str = "You need to observe this picture carefully. This is a scientific research drawing. How many unreasonable aspects do you think there are in this image? Unreasonable aspects refer to: position conflicts or mismatches of modules; text content and module size conflicts resulting in text going out of range or unexpected line breaks; redundant or repetitive designs in the image. For each unreasonable aspect you find, you need to provide some analysis, in the format like: Module 1: The position conflicts with Module 2, causing overlap... When finding problems, you must be strict and try to find as many design errors as possible. But at the same time, each problem must be well - founded. At the end, you need to output only one number representing the number of errors. Make a line break from the previous content. Write only one integer on a separate line at the end to represent the total number of errors.";

/// Blank-ratio instruction for grid-overlaid rasters.
pub const BLANK_RATIO_INSTRUCTION: &str = "The attached image is a diagram with a square grid drawn on top of it. Consider only the grid cells that lie inside the bounding region of the drawn content. Count a cell as wasted when it is empty and sits in an oversized gap between separate components; padding inside a component and the outer margin are not wasted. Give a short justification, then put the fraction of wasted cells as a single decimal number between 0 and 1 alone on the last line.";

pub const ENV_ENDPOINT: &str = "JUDGE_ENDPOINT";
pub const ENV_API_KEY: &str = "JUDGE_API_KEY";
pub const ENV_MODEL: &str = "JUDGE_MODEL";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum JudgeError {
    #[error("judge unreachable: {0}")]
    Unreachable(String),
    #[error("no parseable verdict in {runs} run(s); last response: {last_response:?}")]
    UnparseableVerdict { runs: usize, last_response: String },
    #[error("invalid judge config: {0}")]
    InvalidConfig(String),
    #[error("cache I/O failed: {0}")]
    Cache(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JudgeConfig {
    pub endpoint: String,
    pub model_name: String,
    #[serde(skip_serializing)]
    pub api_key: Option<String>,
    pub temperature: f64,
    pub runs: usize,
    pub cache_dir: PathBuf,
    pub timeout: Duration,
}

impl JudgeConfig {
    pub fn new(
        endpoint: impl Into<String>,
        model_name: impl Into<String>,
        cache_dir: impl Into<PathBuf>,
    ) -> Self {
        JudgeConfig {
            endpoint: endpoint.into(),
            model_name: model_name.into(),
            api_key: None,
            temperature: 0.0,
            runs: 3,
            cache_dir: cache_dir.into(),
            timeout: Duration::from_secs(120),
        }
    }

    /// Build from `JUDGE_ENDPOINT`, `JUDGE_MODEL` and `JUDGE_API_KEY`.
    pub fn from_env(cache_dir: impl Into<PathBuf>) -> Result<Self, JudgeError> {
        let endpoint = std::env::var(ENV_ENDPOINT)
            .map_err(|_| JudgeError::InvalidConfig(format!("{ENV_ENDPOINT} is not set")))?;
        let model = std::env::var(ENV_MODEL).unwrap_or_else(|_| "gpt-o3".to_string());
        let mut cfg = JudgeConfig::new(endpoint, model, cache_dir);
        cfg.api_key = std::env::var(ENV_API_KEY).ok();
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), JudgeError> {
        if self.runs < 1 {
            return Err(JudgeError::InvalidConfig("runs must be >= 1".into()));
        }
        if !(self.temperature >= 0.0) {
            return Err(JudgeError::InvalidConfig("temperature must be >= 0".into()));
        }
        Ok(())
    }
}

/// Per-run outcome of a design-error judgement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JudgeVerdict {
    pub model: String,
    pub raw_responses: Vec<String>,
    pub parsed_counts: Vec<u32>,
    pub mean_count: f64,
    pub from_cache: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlankVerdict {
    pub model: String,
    pub raw_responses: Vec<String>,
    pub parsed_ratios: Vec<f64>,
    pub mean_ratio: f64,
    pub from_cache: bool,
}

fn last_line(response: &str) -> Option<&str> {
    response
        .lines()
        .map(str::trim)
        .rev()
        .find(|l| !l.is_empty())
}

/// The integer on the final non-empty line, if that line is only an integer
/// (surrounding markdown emphasis is tolerated).
pub fn parse_trailing_integer(response: &str) -> Option<u32> {
    let line = last_line(response)?.trim_matches(|c| c == '*' || c == '`');
    if line.is_empty() || !line.chars().all(|c| c.is_ascii_digit()) {
        return None;
    }
    line.parse().ok()
}

/// The ratio on the final non-empty line: a decimal in `[0, 1]` or a
/// percentage.
pub fn parse_trailing_ratio(response: &str) -> Option<f64> {
    let line = last_line(response)?.trim_matches(|c| c == '*' || c == '`');
    let value = match line.strip_suffix('%') {
        Some(pct) => pct.trim().parse::<f64>().ok()? / 100.0,
        None => line.parse::<f64>().ok()?,
    };
    (0.0..=1.0).contains(&value).then_some(value)
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Cached, repeat-averaging judge client.
pub struct JudgeGateway {
    cfg: JudgeConfig,
    transport: Box<dyn JudgeTransport>,
    cache: ResponseCache,
    inflight: Mutex<HashMap<String, Arc<Mutex<()>>>>,
}

struct Responses {
    texts: Vec<String>,
    from_cache: bool,
}

impl JudgeGateway {
    pub fn new(cfg: JudgeConfig, transport: Box<dyn JudgeTransport>) -> Result<Self, JudgeError> {
        cfg.validate()?;
        let cache = ResponseCache::new(cfg.cache_dir.clone());
        Ok(JudgeGateway {
            cfg,
            transport,
            cache,
            inflight: Mutex::new(HashMap::new()),
        })
    }

    /// Gateway over HTTP using the chat-completions adapter.
    #[cfg(feature = "http")]
    pub fn http(cfg: JudgeConfig) -> Result<Self, JudgeError> {
        let transport = HttpTransport::new(cfg.endpoint.clone(), cfg.api_key.clone(), cfg.timeout);
        Self::new(cfg, Box::new(transport))
    }

    pub fn config(&self) -> &JudgeConfig {
        &self.cfg
    }

    fn key_lock(&self, key: &str) -> Arc<Mutex<()>> {
        let mut map = self.inflight.lock().expect("inflight map poisoned");
        map.entry(key.to_string()).or_default().clone()
    }

    /// Cached responses for `(image, instruction)`, or `runs` fresh calls.
    /// Concurrent callers with the same key wait for the first one.
    fn responses(&self, image_png: &[u8], instruction: &str) -> Result<Responses, JudgeError> {
        let image_sha = sha256_hex(image_png);
        let key = cache_key(&image_sha, &self.cfg.model_name, instruction);
        let lock = self.key_lock(&key);
        let _guard = lock.lock().expect("key lock poisoned");
        if let Some(entry) = self.cache.get(&key) {
            log::debug!("judge cache hit {key}");
            return Ok(Responses {
                texts: entry.responses,
                from_cache: true,
            });
        }
        let request = JudgeRequest {
            model: &self.cfg.model_name,
            instruction,
            image_png,
            temperature: self.cfg.temperature,
        };
        let mut texts = Vec::with_capacity(self.cfg.runs);
        let mut timestamps = Vec::with_capacity(self.cfg.runs);
        for _ in 0..self.cfg.runs {
            let text = self
                .transport
                .complete(&request)
                .map_err(|e| JudgeError::Unreachable(e.to_string()))?;
            texts.push(text);
            timestamps.push(chrono::Utc::now().to_rfc3339());
        }
        let entry = CacheEntry {
            schema_version: SCHEMA_VERSION,
            key,
            image_sha256: image_sha,
            model: self.cfg.model_name.clone(),
            instruction_sha256: sha256_hex(instruction.as_bytes()),
            responses: texts.clone(),
            timestamps,
        };
        self.cache
            .put(&entry)
            .map_err(|e| JudgeError::Cache(e.to_string()))?;
        Ok(Responses {
            texts,
            from_cache: false,
        })
    }

    /// Count design errors; runs without a trailing integer are discarded.
    pub fn judge_design_errors(&self, image_png: &[u8]) -> Result<JudgeVerdict, JudgeError> {
        let r = self.responses(image_png, DESIGN_ERROR_INSTRUCTION)?;
        let mut counts = Vec::new();
        for text in &r.texts {
            match parse_trailing_integer(text) {
                Some(n) => counts.push(n),
                None => log::warn!("discarding unparseable judge run: {text:?}"),
            }
        }
        if counts.is_empty() {
            return Err(JudgeError::UnparseableVerdict {
                runs: r.texts.len(),
                last_response: r.texts.last().cloned().unwrap_or_default(),
            });
        }
        let as_f64: Vec<f64> = counts.iter().map(|&c| f64::from(c)).collect();
        Ok(JudgeVerdict {
            model: self.cfg.model_name.clone(),
            raw_responses: r.texts,
            mean_count: mean(&as_f64),
            parsed_counts: counts,
            from_cache: r.from_cache,
        })
    }

    /// Estimate the invalid-blank ratio of a grid-overlaid raster.
    pub fn judge_blank_ratio(
        &self,
        image_with_grid_png: &[u8],
    ) -> Result<BlankVerdict, JudgeError> {
        let r = self.responses(image_with_grid_png, BLANK_RATIO_INSTRUCTION)?;
        let mut ratios = Vec::new();
        for text in &r.texts {
            match parse_trailing_ratio(text) {
                Some(v) => ratios.push(v),
                None => log::warn!("discarding unparseable blank-ratio run: {text:?}"),
            }
        }
        if ratios.is_empty() {
            return Err(JudgeError::UnparseableVerdict {
                runs: r.texts.len(),
                last_response: r.texts.last().cloned().unwrap_or_default(),
            });
        }
        Ok(BlankVerdict {
            model: self.cfg.model_name.clone(),
            raw_responses: r.texts,
            mean_ratio: mean(&ratios),
            parsed_ratios: ratios,
            from_cache: r.from_cache,
        })
    }
}
