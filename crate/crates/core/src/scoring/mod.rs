//! Base score, step counting and the Dynamic Quality Score.
//!
//! `DQS(s, n) = s·(1 − (1 − s)·sat(n)) + r·s·(1 − sat(n))` with
//! `sat(n) = n / (n + K)`. `K` (mean step count) and `r` (one minus the mean
//! base score) are fitted once per season block and then frozen.

mod report;
mod trace;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use report::{summarize, Summary, SummaryRow};
pub use trace::{count_steps, StepPolicy, TraceEntry, TraceLog, TraceStatus, DEFAULT_STEP_TOOLS};

use crate::Mode;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScoringError {
    #[error("weight profile '{id}' is invalid: {reason}")]
    WeightMismatch { id: String, reason: String },
    #[error("metric {name} = {value} is outside [0, 1]")]
    MetricOutOfRange { name: &'static str, value: f64 },
    #[error("malformed trace: {0}")]
    MalformedTrace(String),
    #[error("K must be positive, got {0}")]
    NonpositiveK(f64),
    #[error("season parameters '{0}' are not frozen")]
    UnfrozenSeason(String),
    #[error("season has no records")]
    EmptySeason,
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

/// The six `[0, 1]` quality metrics, bound by name.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricVector {
    pub precision: f64,
    pub recall: f64,
    pub design: f64,
    pub blank: f64,
    pub readability: f64,
    pub align: f64,
}

impl MetricVector {
    pub const NAMES: [&'static str; 6] = [
        "precision",
        "recall",
        "design",
        "blank",
        "readability",
        "align",
    ];

    pub fn new(
        precision: f64,
        recall: f64,
        design: f64,
        blank: f64,
        readability: f64,
        align: f64,
    ) -> Self {
        MetricVector {
            precision,
            recall,
            design,
            blank,
            readability,
            align,
        }
    }

    pub fn perfect() -> Self {
        Self::new(1.0, 1.0, 1.0, 1.0, 1.0, 1.0)
    }

    /// `(name, value)` pairs in the fixed column order.
    pub fn named(&self) -> [(&'static str, f64); 6] {
        [
            ("precision", self.precision),
            ("recall", self.recall),
            ("design", self.design),
            ("blank", self.blank),
            ("readability", self.readability),
            ("align", self.align),
        ]
    }

    pub fn validate(&self) -> Result<(), ScoringError> {
        for (name, value) in self.named() {
            if !(0.0..=1.0).contains(&value) {
                return Err(ScoringError::MetricOutOfRange { name, value });
            }
        }
        Ok(())
    }
}

/// Non-negative metric weights summing to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightProfile {
    pub id: String,
    pub precision: f64,
    pub recall: f64,
    pub design: f64,
    pub blank: f64,
    pub readability: f64,
    pub align: f64,
}

impl WeightProfile {
    pub fn new(
        id: impl Into<String>,
        precision: f64,
        recall: f64,
        design: f64,
        blank: f64,
        readability: f64,
        align: f64,
    ) -> Result<Self, ScoringError> {
        let w = WeightProfile {
            id: id.into(),
            precision,
            recall,
            design,
            blank,
            readability,
            align,
        };
        w.validate()?;
        Ok(w)
    }

    /// (0.20, 0.20, 0.20, 0.05, 0.25, 0.10) over
    /// (precision, recall, design, blank, readability, align).
    pub fn standard() -> Self {
        WeightProfile {
            id: "default".into(),
            precision: 0.20,
            recall: 0.20,
            design: 0.20,
            blank: 0.05,
            readability: 0.25,
            align: 0.10,
        }
    }

    pub fn equal() -> Self {
        let w = 1.0 / 6.0;
        WeightProfile {
            id: "equal".into(),
            precision: w,
            recall: w,
            design: w,
            blank: w,
            readability: w,
            align: w,
        }
    }

    pub fn by_name(name: &str) -> Option<Self> {
        match name {
            "default" | "standard" => Some(Self::standard()),
            "equal" => Some(Self::equal()),
            _ => None,
        }
    }

    fn values(&self) -> [f64; 6] {
        [
            self.precision,
            self.recall,
            self.design,
            self.blank,
            self.readability,
            self.align,
        ]
    }

    pub fn validate(&self) -> Result<(), ScoringError> {
        let mismatch = |reason: String| ScoringError::WeightMismatch {
            id: self.id.clone(),
            reason,
        };
        if self.values().iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(mismatch("weights must be finite and non-negative".into()));
        }
        let sum: f64 = self.values().iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(mismatch(format!("weights sum to {sum}, expected 1")));
        }
        Ok(())
    }
}

/// `s = Σ w_k · m_k`.
pub fn base_score(metrics: &MetricVector, weights: &WeightProfile) -> Result<f64, ScoringError> {
    weights.validate()?;
    metrics.validate()?;
    let s = weights.precision * metrics.precision
        + weights.recall * metrics.recall
        + weights.design * metrics.design
        + weights.blank * metrics.blank
        + weights.readability * metrics.readability
        + weights.align * metrics.align;
    Ok(s.clamp(0.0, 1.0))
}

/// `n / (n + K)`.
pub fn saturation(n: f64, k: f64) -> Result<f64, ScoringError> {
    if !(k > 0.0) {
        return Err(ScoringError::NonpositiveK(k));
    }
    if !(n >= 0.0) {
        return Err(ScoringError::InvalidInput(format!(
            "step count {n} is negative"
        )));
    }
    Ok(n / (n + k))
}

/// Per-season DQS constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeasonParams {
    pub season_id: String,
    /// Mean step count.
    pub k: f64,
    /// One minus the mean base score.
    pub r: f64,
    frozen: bool,
}

impl SeasonParams {
    /// Unfrozen parameters; call [`SeasonParams::freeze`] before scoring.
    pub fn new(season_id: impl Into<String>, k: f64, r: f64) -> Result<Self, ScoringError> {
        if !(k > 0.0) || !k.is_finite() {
            return Err(ScoringError::NonpositiveK(k));
        }
        if !(0.0..=1.0).contains(&r) {
            return Err(ScoringError::InvalidInput(format!(
                "r = {r} is outside [0, 1]"
            )));
        }
        Ok(SeasonParams {
            season_id: season_id.into(),
            k,
            r,
            frozen: false,
        })
    }

    pub fn freeze(mut self) -> Self {
        self.frozen = true;
        self
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen
    }
}

/// Dynamic Quality Score.
pub fn dqs(s: f64, n: f64, params: &SeasonParams) -> Result<f64, ScoringError> {
    if !params.frozen {
        return Err(ScoringError::UnfrozenSeason(params.season_id.clone()));
    }
    if !(0.0..=1.0).contains(&s) {
        return Err(ScoringError::InvalidInput(format!(
            "base score {s} is outside [0, 1]"
        )));
    }
    let sat = saturation(n, params.k)?;
    Ok(s * (1.0 - (1.0 - s) * sat) + params.r * s * (1.0 - sat))
}

/// Net change `Δ = DQS − s = s/(n + K) · [rK − (1 − s)n]`.
pub fn dqs_delta(s: f64, n: f64, k: f64, r: f64) -> f64 {
    s / (n + k) * (r * k - (1.0 - s) * n)
}

/// Step count at which `Δ` changes sign for a given `s < 1`.
pub fn break_even_steps(s: f64, k: f64, r: f64) -> f64 {
    r * k / (1.0 - s)
}

/// `Δ(s, n)` sampled on a grid, for plotting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaSurface {
    pub k: f64,
    pub r: f64,
    pub s_grid: Vec<f64>,
    pub n_grid: Vec<f64>,
    /// `delta[i][j] = Δ(s_grid[i], n_grid[j])`.
    pub delta: Vec<Vec<f64>>,
}

pub fn dqs_delta_surface(
    k: f64,
    r: f64,
    s_grid: &[f64],
    n_grid: &[f64],
) -> Result<DeltaSurface, ScoringError> {
    if s_grid.is_empty() || n_grid.is_empty() {
        return Err(ScoringError::InvalidInput("grids must be non-empty".into()));
    }
    if !(k > 0.0) {
        return Err(ScoringError::NonpositiveK(k));
    }
    let delta = s_grid
        .iter()
        .map(|&s| n_grid.iter().map(|&n| dqs_delta(s, n, k, r)).collect())
        .collect();
    Ok(DeltaSurface {
        k,
        r,
        s_grid: s_grid.to_vec(),
        n_grid: n_grid.to_vec(),
        delta,
    })
}

/// `count` evenly spaced values from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..count)
            .map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64)
            .collect(),
    }
}

impl DeltaSurface {
    /// Long-form CSV (`s,n,delta`) with a version comment line. Values use
    /// Rust's shortest round-trip float formatting.
    pub fn to_csv(&self) -> String {
        let mut out = format!(
            "# {} schema={} K={} r={}\ns,n,delta\n",
            crate::TOOL_VERSION,
            crate::SCHEMA_VERSION,
            self.k,
            self.r
        );
        for (i, s) in self.s_grid.iter().enumerate() {
            for (j, n) in self.n_grid.iter().enumerate() {
                out.push_str(&format!("{s},{n},{}\n", self.delta[i][j]));
            }
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self, ScoringError> {
        let bad = |m: &str| ScoringError::InvalidInput(format!("surface csv: {m}"));
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| bad("empty"))?;
        let mut k = None;
        let mut r = None;
        for tok in header.split_whitespace() {
            if let Some(v) = tok.strip_prefix("K=") {
                k = v.parse::<f64>().ok();
            } else if let Some(v) = tok.strip_prefix("r=") {
                r = v.parse::<f64>().ok();
            }
        }
        let (k, r) = (
            k.ok_or_else(|| bad("missing K"))?,
            r.ok_or_else(|| bad("missing r"))?,
        );
        if lines.next() != Some("s,n,delta") {
            return Err(bad("missing column header"));
        }
        let mut rows: Vec<(f64, f64, f64)> = Vec::new();
        for line in lines.filter(|l| !l.trim().is_empty()) {
            let vals: Vec<f64> = line
                .split(',')
                .map(|v| v.trim().parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|_| bad(line))?;
            if vals.len() != 3 {
                return Err(bad(line));
            }
            rows.push((vals[0], vals[1], vals[2]));
        }
        let mut s_grid: Vec<f64> = Vec::new();
        let mut n_grid: Vec<f64> = Vec::new();
        for &(s, n, _) in &rows {
            if s_grid.last() != Some(&s) {
                s_grid.push(s);
            }
            if s_grid.len() == 1 {
                n_grid.push(n);
            }
        }
        if rows.len() != s_grid.len() * n_grid.len() {
            return Err(bad("ragged grid"));
        }
        let delta = rows
            .chunks(n_grid.len())
            .map(|c| c.iter().map(|r| r.2).collect())
            .collect();
        Ok(DeltaSurface {
            k,
            r,
            s_grid,
            n_grid,
            delta,
        })
    }
}

/// Where a metric value came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum MetricSource {
    Deterministic,
    Judge {
        model: String,
        runs: usize,
        cached: bool,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub design: MetricSource,
    pub blank: MetricSource,
    pub readability: MetricSource,
}

impl Default for Provenance {
    fn default() -> Self {
        Provenance {
            design: MetricSource::Deterministic,
            blank: MetricSource::Deterministic,
            readability: MetricSource::Deterministic,
        }
    }
}

/// One scored task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRecord {
    pub task_id: String,
    /// System or model that produced the diagram.
    #[serde(default)]
    pub system: String,
    pub mode: Mode,
    pub metrics: MetricVector,
    /// Valid step count (a mean when the record aggregates several runs).
    pub n: f64,
    pub s: f64,
    pub dqs: f64,
    pub weights_id: String,
    pub season_id: String,
    #[serde(default)]
    pub provenance: Provenance,
}

impl ScoreRecord {
    /// Re-aggregate with another weight profile and frozen season, without
    /// re-measuring anything.
    pub fn reweighted(
        &self,
        weights: &WeightProfile,
        params: &SeasonParams,
    ) -> Result<Self, ScoringError> {
        let s = base_score(&self.metrics, weights)?;
        Ok(ScoreRecord {
            s,
            dqs: dqs(s, self.n, params)?,
            weights_id: weights.id.clone(),
            season_id: params.season_id.clone(),
            ..self.clone()
        })
    }
}

/// `K = mean(n)`, `r = 1 − mean(s)`, frozen.
pub fn fit_season_params(
    season_id: &str,
    records: &[ScoreRecord],
) -> Result<SeasonParams, ScoringError> {
    fit_from_pairs(season_id, records.iter().map(|r| (r.n, r.s)))
}

pub(crate) fn fit_from_pairs(
    season_id: &str,
    pairs: impl IntoIterator<Item = (f64, f64)>,
) -> Result<SeasonParams, ScoringError> {
    let (mut count, mut sum_n, mut sum_s) = (0usize, 0.0, 0.0);
    for (n, s) in pairs {
        count += 1;
        sum_n += n;
        sum_s += s;
    }
    if count == 0 {
        return Err(ScoringError::EmptySeason);
    }
    let k = sum_n / count as f64;
    let r = 1.0 - sum_s / count as f64;
    Ok(SeasonParams::new(season_id, k, r)?.freeze())
}

/// Fit separate parameters for each mode present in `records`.
pub fn fit_season_params_by_mode(
    season_id: &str,
    records: &[ScoreRecord],
) -> Result<Vec<(Mode, SeasonParams)>, ScoringError> {
    let mut out = Vec::new();
    for mode in Mode::ALL {
        let block: Vec<_> = records.iter().filter(|r| r.mode == mode).cloned().collect();
        if !block.is_empty() {
            out.push((mode, fit_season_params(season_id, &block)?));
        }
    }
    if out.is_empty() {
        return Err(ScoringError::EmptySeason);
    }
    Ok(out)
}
