//! End-to-end task evaluation: document → metrics → base score → DQS.
//!
//! Judge-backed metrics never fall back to the deterministic detectors; a
//! judge failure fails the whole record.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::content;
use crate::document::{
    extract_text_set, normalize_text, parse_document, rasterize, DocumentError, InputFormat,
    RasterGrid, VectorDocument, DEFAULT_SHORT_SIDE,
};
use crate::judge::{JudgeError, JudgeGateway};
use crate::layout::{self, BlankEstimate, LayoutError, DEFAULT_CELL, DEFAULT_INK_THRESHOLD};
use crate::perceptual::{self, ErrorReport, PerceptualError, ReadabilityReport};
use crate::registry::CorpusItem;
use crate::scoring::{
    base_score, count_steps, dqs, summarize, MetricSource, MetricVector, Provenance, ScoreRecord,
    ScoringError, SeasonParams, Summary, TraceLog, WeightProfile,
};
use crate::Mode;

/// Gray level of the grid lines drawn on images sent to the blank judge.
const GRID_LINE_GRAY: u8 = 160;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error(transparent)]
    Document(#[from] DocumentError),
    #[error(transparent)]
    Layout(#[from] LayoutError),
    #[error(transparent)]
    Perceptual(#[from] PerceptualError),
    #[error(transparent)]
    Scoring(#[from] ScoringError),
    #[error(transparent)]
    Judge(#[from] JudgeError),
    #[error("judge mode requested but no judge is configured")]
    JudgeNotConfigured,
    #[error("document '{document}' does not belong to task '{item}'")]
    EpisodeMismatch { item: String, document: String },
    #[error("no frozen season parameters for {0}")]
    MissingSeason(Mode),
}

impl EvalError {
    /// True for failures of the external judge service.
    pub fn is_external(&self) -> bool {
        matches!(
            self,
            EvalError::Judge(JudgeError::Unreachable(_))
                | EvalError::Judge(JudgeError::UnparseableVerdict { .. })
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricMode {
    #[default]
    Deterministic,
    Judge,
}

impl std::str::FromStr for MetricMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "deterministic" => Ok(MetricMode::Deterministic),
            "judge" => Ok(MetricMode::Judge),
            other => Err(format!(
                "unknown metric mode '{other}' (expected deterministic or judge)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ModeFlags {
    /// Design-error counting.
    pub perceptual: MetricMode,
    pub blank: MetricMode,
}

impl ModeFlags {
    pub fn uniform(mode: MetricMode) -> Self {
        ModeFlags {
            perceptual: mode,
            blank: mode,
        }
    }

    fn needs_judge(&self) -> bool {
        self.perceptual == MetricMode::Judge || self.blank == MetricMode::Judge
    }
}

#[derive(Debug, Clone)]
pub struct EvalRequest {
    pub item: CorpusItem,
    /// System or model that produced the document.
    pub system: String,
    pub document: VectorDocument,
    pub trace: TraceLog,
    pub flags: ModeFlags,
    pub weights: WeightProfile,
}

/// Everything measured for one task, beyond the record itself.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalDetail {
    pub record: ScoreRecord,
    pub design: ErrorReport,
    pub blank: BlankEstimate,
    pub readability: ReadabilityReport,
    pub required: BTreeSet<String>,
    pub generated: BTreeSet<String>,
}

/// Holds rendering settings and an optional judge.
pub struct Evaluator {
    judge: Option<JudgeGateway>,
    short_side: u32,
    cell: usize,
    ink_threshold: f64,
}

impl Default for Evaluator {
    fn default() -> Self {
        Self::deterministic()
    }
}

impl Evaluator {
    pub fn deterministic() -> Self {
        Evaluator {
            judge: None,
            short_side: DEFAULT_SHORT_SIDE,
            cell: DEFAULT_CELL,
            ink_threshold: DEFAULT_INK_THRESHOLD,
        }
    }

    pub fn with_judge(judge: JudgeGateway) -> Self {
        Evaluator {
            judge: Some(judge),
            ..Self::deterministic()
        }
    }

    pub fn judge(&self) -> Option<&JudgeGateway> {
        self.judge.as_ref()
    }

    pub fn evaluate(
        &self,
        req: &EvalRequest,
        params: &SeasonParams,
    ) -> Result<ScoreRecord, EvalError> {
        self.evaluate_detailed(req, params).map(|d| d.record)
    }

    pub fn evaluate_detailed(
        &self,
        req: &EvalRequest,
        params: &SeasonParams,
    ) -> Result<EvalDetail, EvalError> {
        if !params.is_frozen() {
            return Err(ScoringError::UnfrozenSeason(params.season_id.clone()).into());
        }
        req.weights.validate()?;
        let source = req.document.source_id();
        if !source.is_empty() && source != req.item.id {
            return Err(EvalError::EpisodeMismatch {
                item: req.item.id.clone(),
                document: source.to_string(),
            });
        }
        let judge = if req.flags.needs_judge() {
            Some(self.judge.as_ref().ok_or(EvalError::JudgeNotConfigured)?)
        } else {
            None
        };
        let n = count_steps(&req.trace)? as f64;

        let required: BTreeSet<String> = req
            .item
            .required_text
            .iter()
            .map(|s| normalize_text(s))
            .filter(|s| !s.is_empty())
            .collect();
        let generated = extract_text_set(&req.document);
        let grid = rasterize(&req.document, self.short_side)?;
        let mut provenance = Provenance::default();

        let design = match (req.flags.perceptual, judge) {
            (MetricMode::Judge, Some(j)) => {
                let v = j.judge_design_errors(&grid.to_png())?;
                provenance.design = MetricSource::Judge {
                    model: v.model.clone(),
                    runs: v.parsed_counts.len(),
                    cached: v.from_cache,
                };
                ErrorReport {
                    errors: Vec::new(),
                    count_e: v.mean_count,
                    source: perceptual::ErrorSource::Judge {
                        model: v.model,
                        runs: v.parsed_counts,
                    },
                }
            }
            _ => perceptual::detect_design_errors(&req.document),
        };

        let mut blank = layout::estimate_blank(&grid, self.cell, self.ink_threshold)?;
        if let (MetricMode::Judge, Some(j)) = (req.flags.blank, judge) {
            let overlay = layout::overlay_grid(&grid, self.cell, GRID_LINE_GRAY);
            let v = j.judge_blank_ratio(&overlay.to_png())?;
            provenance.blank = MetricSource::Judge {
                model: v.model,
                runs: v.parsed_ratios.len(),
                cached: v.from_cache,
            };
            blank.beta = v.mean_ratio;
        }

        let readability = perceptual::assess_readability(&req.document, &grid);
        let metrics = MetricVector {
            precision: content::precision(&required, &generated),
            recall: content::recall(&required, &generated),
            design: perceptual::design_score(design.count_e)?,
            blank: layout::blank_score(blank.beta)?,
            readability: perceptual::readability_score(&readability, &generated),
            align: layout::alignment_score(&grid),
        };
        let s = base_score(&metrics, &req.weights)?;
        let record = ScoreRecord {
            task_id: req.item.id.clone(),
            system: req.system.clone(),
            mode: req.item.mode,
            metrics,
            n,
            s,
            dqs: dqs(s, n, params)?,
            weights_id: req.weights.id.clone(),
            season_id: params.season_id.clone(),
            provenance,
        };
        Ok(EvalDetail {
            record,
            design,
            blank,
            readability,
            required,
            generated,
        })
    }

    /// Rasterisation used for every pixel metric.
    pub fn render(&self, doc: &VectorDocument) -> Result<RasterGrid, DocumentError> {
        rasterize(doc, self.short_side)
    }

    /// Evaluate in parallel, preserving input order. Failures are collected
    /// per item and never stop the batch.
    pub fn evaluate_batch(
        &self,
        inputs: Vec<BatchInput>,
        seasons: &BTreeMap<Mode, SeasonParams>,
    ) -> BatchOutcome {
        let total = inputs.len();
        let slots: Vec<Mutex<Option<Result<ScoreRecord, EvalError>>>> =
            (0..total).map(|_| Mutex::new(None)).collect();
        let next = AtomicUsize::new(0);
        let workers = std::thread::available_parallelism()
            .map_or(1, |n| n.get())
            .min(total.max(1));
        std::thread::scope(|scope| {
            for _ in 0..workers {
                scope.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::Relaxed);
                    if i >= total {
                        break;
                    }
                    let result = self.evaluate_input(&inputs[i], seasons);
                    *slots[i].lock().expect("slot lock") = Some(result);
                });
            }
        });
        let mut records = Vec::new();
        let mut errors = Vec::new();
        for (index, (slot, input)) in slots.into_iter().zip(&inputs).enumerate() {
            match slot
                .into_inner()
                .expect("slot lock")
                .expect("every slot is filled")
            {
                Ok(r) => records.push(r),
                Err(e) => errors.push(BatchError {
                    index,
                    task_id: input.item().id.clone(),
                    external: e.is_external(),
                    message: e.to_string(),
                }),
            }
        }
        let summary = summarize(&records);
        BatchOutcome {
            records,
            errors,
            summary,
        }
    }

    fn evaluate_input(
        &self,
        input: &BatchInput,
        seasons: &BTreeMap<Mode, SeasonParams>,
    ) -> Result<ScoreRecord, EvalError> {
        let params = seasons
            .get(&input.item().mode)
            .ok_or(EvalError::MissingSeason(input.item().mode))?;
        match input {
            BatchInput::Parsed(req) => self.evaluate(req, params),
            BatchInput::Raw {
                item,
                system,
                bytes,
                format,
                trace,
                flags,
                weights,
            } => {
                let document = parse_document(bytes, *format)?;
                let req = EvalRequest {
                    item: item.clone(),
                    system: system.clone(),
                    document,
                    trace: trace.clone(),
                    flags: *flags,
                    weights: weights.clone(),
                };
                self.evaluate(&req, params)
            }
        }
    }
}

/// A batch entry, either already parsed or as raw document bytes.
#[derive(Debug, Clone)]
pub enum BatchInput {
    Parsed(EvalRequest),
    Raw {
        item: CorpusItem,
        system: String,
        bytes: Vec<u8>,
        format: InputFormat,
        trace: TraceLog,
        flags: ModeFlags,
        weights: WeightProfile,
    },
}

impl BatchInput {
    pub fn item(&self) -> &CorpusItem {
        match self {
            BatchInput::Parsed(r) => &r.item,
            BatchInput::Raw { item, .. } => item,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchError {
    pub index: usize,
    pub task_id: String,
    pub external: bool,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchOutcome {
    pub records: Vec<ScoreRecord>,
    pub errors: Vec<BatchError>,
    pub summary: Summary,
}

impl BatchOutcome {
    pub fn records_jsonl(&self) -> String {
        records_to_jsonl(&self.records)
    }
}

/// One record per line.
pub fn records_to_jsonl(records: &[ScoreRecord]) -> String {
    records
        .iter()
        .map(|r| serde_json::to_string(r).expect("record serializes") + "\n")
        .collect()
}

pub fn records_from_jsonl(text: &str) -> Result<Vec<ScoreRecord>, serde_json::Error> {
    text.lines()
        .filter(|l| !l.trim().is_empty() && !l.starts_with('#'))
        .map(serde_json::from_str)
        .collect()
}
