//! Effective configuration. Precedence: flags, then the config file, then
//! environment variables, then built-in defaults.
//!
//! The config file is TOML:
//!
//! ```toml
//! registry = "registry"
//! cache_dir = ".diagscore-cache"
//! weights = "default"
//! log_level = "info"
//!
//! [judge]
//! endpoint = "https://example.invalid/v1/chat/completions"
//! model = "gpt-o3"
//! runs = 3
//! temperature = 0.0
//! timeout_secs = 120
//! ```
//!
//! The judge API key is read only from `JUDGE_API_KEY`.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};

pub const DEFAULT_CONFIG_FILE: &str = "diagscore.toml";
pub const ENV_CONFIG: &str = "DIAGSCORE_CONFIG";
pub const ENV_REGISTRY: &str = "DIAGSCORE_REGISTRY";
pub const ENV_CACHE_DIR: &str = "DIAGSCORE_CACHE_DIR";
pub const ENV_WEIGHTS: &str = "DIAGSCORE_WEIGHTS";
pub const ENV_LOG: &str = "DIAGSCORE_LOG";

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    registry: Option<PathBuf>,
    cache_dir: Option<PathBuf>,
    weights: Option<String>,
    log_level: Option<String>,
    #[serde(default)]
    judge: FileJudge,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileJudge {
    endpoint: Option<String>,
    model: Option<String>,
    runs: Option<usize>,
    temperature: Option<f64>,
    timeout_secs: Option<u64>,
}

/// Values supplied on the command line; `None` means "not given".
#[derive(Debug, Default, Clone)]
pub struct FlagValues {
    pub config: Option<PathBuf>,
    pub registry: Option<PathBuf>,
    pub cache_dir: Option<PathBuf>,
    pub weights: Option<String>,
    pub log_level: Option<String>,
    pub judge_endpoint: Option<String>,
    pub judge_model: Option<String>,
    pub judge_runs: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CliConfig {
    pub config_file: Option<PathBuf>,
    pub registry: PathBuf,
    pub cache_dir: PathBuf,
    pub weights: String,
    pub log_level: String,
    pub judge_endpoint: Option<String>,
    pub judge_model: String,
    #[serde(skip)]
    pub judge_api_key: Option<String>,
    pub judge_runs: usize,
    pub judge_temperature: f64,
    pub judge_timeout_secs: u64,
}

impl CliConfig {
    /// Resolve with `env` as the environment lookup and `cwd` as the base
    /// for the default config file.
    pub fn resolve(
        flags: &FlagValues,
        env: impl Fn(&str) -> Option<String>,
        cwd: &Path,
    ) -> anyhow::Result<Self> {
        let explicit = flags
            .config
            .clone()
            .or_else(|| env(ENV_CONFIG).map(PathBuf::from));
        let config_file = match explicit {
            Some(p) => {
                if !p.is_file() {
                    bail!("config file {} does not exist", p.display());
                }
                Some(p)
            }
            None => Some(cwd.join(DEFAULT_CONFIG_FILE)).filter(|p| p.is_file()),
        };
        let file: FileConfig = match &config_file {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .with_context(|| format!("reading {}", p.display()))?;
                toml::from_str(&text).with_context(|| format!("parsing {}", p.display()))?
            }
            None => FileConfig::default(),
        };
        let pick_path =
            |flag: &Option<PathBuf>, file: &Option<PathBuf>, var: &str, default: &str| {
                flag.clone()
                    .or_else(|| file.clone())
                    .or_else(|| env(var).map(PathBuf::from))
                    .unwrap_or_else(|| PathBuf::from(default))
            };
        let pick = |flag: &Option<String>, file: &Option<String>, var: &str| {
            flag.clone().or_else(|| file.clone()).or_else(|| env(var))
        };
        let judge_runs = match flags.judge_runs.or(file.judge.runs) {
            Some(r) => r,
            None => match env("JUDGE_RUNS") {
                Some(v) => v.parse().context("JUDGE_RUNS must be a positive integer")?,
                None => 3,
            },
        };
        Ok(CliConfig {
            registry: pick_path(&flags.registry, &file.registry, ENV_REGISTRY, "registry"),
            cache_dir: pick_path(
                &flags.cache_dir,
                &file.cache_dir,
                ENV_CACHE_DIR,
                ".diagscore-cache",
            ),
            weights: pick(&flags.weights, &file.weights, ENV_WEIGHTS)
                .unwrap_or_else(|| "default".into()),
            log_level: pick(&flags.log_level, &file.log_level, ENV_LOG)
                .unwrap_or_else(|| "warn".into()),
            judge_endpoint: pick(
                &flags.judge_endpoint,
                &file.judge.endpoint,
                diagscore::judge::ENV_ENDPOINT,
            ),
            judge_model: pick(
                &flags.judge_model,
                &file.judge.model,
                diagscore::judge::ENV_MODEL,
            )
            .unwrap_or_else(|| "gpt-o3".into()),
            judge_api_key: env(diagscore::judge::ENV_API_KEY),
            judge_runs,
            judge_temperature: file.judge.temperature.unwrap_or(0.0),
            judge_timeout_secs: file.judge.timeout_secs.unwrap_or(120),
            config_file,
        })
    }
}
