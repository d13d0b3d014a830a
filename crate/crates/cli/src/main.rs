//! `diagscore` command-line interface.
//!
//! Exit codes: 0 success, 1 input or usage error, 2 external-service error.

mod commands;
mod config;
mod io;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use diagscore::pipeline::MetricMode;
use diagscore::Mode;

#[derive(Debug, Parser)]
#[command(
    name = "diagscore",
    version,
    about = "Score vector diagrams and manage evaluation seasons"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Config file (TOML). Defaults to ./diagscore.toml when present.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Registry directory.
    #[arg(long, global = true)]
    pub registry: Option<PathBuf>,
    /// Judge response cache directory.
    #[arg(long, global = true)]
    pub cache_dir: Option<PathBuf>,
    /// Log filter, e.g. `info` or `diagscore=debug`.
    #[arg(long, global = true)]
    pub log_level: Option<String>,
    /// Print the effective configuration to stderr.
    #[arg(short, long, global = true)]
    pub verbose: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Create a registry whose first season's active pool is the given items.
    Init(InitArgs),
    /// Validate items and add them to the current season's staging pool.
    Ingest(IngestArgs),
    /// Evaluate one generated diagram.
    Score(ScoreArgs),
    /// Draw one difficulty-balanced cohort.
    Sample(SampleArgs),
    /// Monte-Carlo stability check of the sampler.
    Mc(McArgs),
    /// Summarise score records per system and mode, sorted by DQS.
    Report(ReportArgs),
    /// Write the DQS net-change grid as CSV.
    DqsSurface(SurfaceArgs),
    /// Season lifecycle operations.
    #[command(subcommand)]
    Season(SeasonCommand),
}

#[derive(Debug, Args)]
pub struct InitArgs {
    #[arg(long)]
    pub season: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Items file (JSON object, JSON array or JSONL of corpus items).
    #[arg(long)]
    pub items: Vec<PathBuf>,
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    #[arg(required = true)]
    pub paths: Vec<PathBuf>,
    /// Input format; inferred from the extension when omitted.
    #[arg(long, value_parser = ["json", "jsonl"])]
    pub format: Option<String>,
    /// Reject items whose mode differs.
    #[arg(long)]
    pub mode: Option<Mode>,
    /// Stage nothing if any item is rejected.
    #[arg(long)]
    pub strict: bool,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    /// Corpus item: a JSON file, or an id in the registry.
    #[arg(long)]
    pub item: String,
    /// Generated document (manifest JSON or SVG).
    #[arg(long)]
    pub doc: PathBuf,
    #[arg(long, value_parser = ["manifest", "svg"])]
    pub format: Option<String>,
    /// Tool-call trace (JSONL). Without it the step count is 0.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Extra tool names counted as steps, added to the default list.
    #[arg(long, value_delimiter = ',')]
    pub step_tools: Vec<String>,
    /// Metric mode for both design errors and blank space.
    #[arg(long, default_value = "deterministic")]
    pub mode: MetricMode,
    /// Override the design-error mode.
    #[arg(long)]
    pub perceptual: Option<MetricMode>,
    /// Override the blank-space mode.
    #[arg(long)]
    pub blank: Option<MetricMode>,
    /// `default`, `equal`, or a weight-profile JSON file.
    #[arg(long)]
    pub weights: Option<String>,
    #[arg(long, default_value = "unknown")]
    pub system: String,
    /// Season mean step count; with `--r`, bypasses registry parameters.
    #[arg(long = "k", visible_alias = "K")]
    pub k: Option<f64>,
    #[arg(long)]
    pub r: Option<f64>,
    #[arg(long)]
    pub judge_endpoint: Option<String>,
    #[arg(long)]
    pub judge_model: Option<String>,
    #[arg(long)]
    pub judge_runs: Option<usize>,
    /// Write the record (with measurement details) as JSON.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Append the record to a JSONL file.
    #[arg(long)]
    pub append: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CorpusArgs {
    /// Corpus file: CSV `id,difficulty` or JSON/JSONL corpus items.
    #[arg(long, conflicts_with = "synthetic")]
    pub corpus: Option<PathBuf>,
    /// Generate a synthetic corpus of this size instead.
    #[arg(long)]
    pub synthetic: Option<usize>,
    #[arg(long, requires = "synthetic", default_value_t = 22.4)]
    pub mu: f64,
    #[arg(long, requires = "synthetic", default_value_t = 9.3)]
    pub sigma: f64,
    #[arg(long, default_value_t = 0)]
    pub corpus_seed: u64,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[arg(long)]
    pub mode: Mode,
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub corpus: CorpusArgs,
    #[arg(long)]
    pub json: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct McArgs {
    #[arg(long)]
    pub mode: Mode,
    #[arg(long, value_delimiter = ',', default_value = "5,6,10,12,15,20")]
    pub n_list: Vec<usize>,
    #[arg(long = "R", visible_alias = "repeats", default_value_t = 100)]
    pub repeats: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub corpus: CorpusArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Score records (JSONL).
    pub records: PathBuf,
    #[arg(long, value_parser = ["table", "csv", "json"], default_value = "table")]
    pub format: String,
    /// Re-aggregate with this weight profile using the stored metrics.
    #[arg(long)]
    pub weights: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SurfaceArgs {
    #[arg(long = "k", visible_alias = "K")]
    pub k: f64,
    #[arg(long)]
    pub r: f64,
    #[arg(long, default_value_t = 101)]
    pub s_points: usize,
    #[arg(long, default_value_t = 0.0)]
    pub n_min: f64,
    /// Defaults to 4·K.
    #[arg(long)]
    pub n_max: Option<f64>,
    #[arg(long, default_value_t = 101)]
    pub n_points: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum SeasonCommand {
    /// Fit K and r per mode from score records and freeze them.
    Freeze {
        records: PathBuf,
        #[arg(long)]
        mode: Option<Mode>,
    },
    /// Pre-draw the monthly cohorts of the current season.
    Precommit {
        #[arg(long, default_value_t = 12)]
        months: u32,
        #[arg(long, default_value_t = 15)]
        t2i: usize,
        #[arg(long, default_value_t = 15)]
        ti2i: usize,
    },
    /// Close the current season and open a new one.
    Advance {
        #[arg(long)]
        id: String,
    },
    /// Print the current season.
    Show,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {:#}", e.error);
            ExitCode::from(e.code)
        }
    }
}
