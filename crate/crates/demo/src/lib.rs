//! Browser bindings. Every export has a plain-Rust twin returning
//! `Result<_, String>` so the logic is testable off the wasm target.

use serde::Serialize;
use serde_json::json;
use wasm_bindgen::prelude::*;

use diagscore::document::parse_manifest;
use diagscore::pipeline::{EvalRequest, Evaluator, ModeFlags};
use diagscore::registry::CorpusItem;
use diagscore::sampler::{sample_cohort, synthetic_corpus, CohortResult, CorpusStats};
use diagscore::scoring::{
    break_even_steps, dqs, dqs_delta_surface, linspace, ScoreRecord, SeasonParams, StepPolicy,
    TraceEntry, TraceLog, WeightProfile,
};
use diagscore::Mode;

#[derive(Debug, Serialize)]
pub struct Surface {
    pub s_grid: Vec<f64>,
    pub n_grid: Vec<f64>,
    /// `delta[i][j]` at `(s_grid[i], n_grid[j])`.
    pub delta: Vec<Vec<f64>>,
    /// Break-even step count per `s`, `None` at `s = 1`.
    pub break_even: Vec<Option<f64>>,
    pub min: f64,
    pub max: f64,
}

pub fn surface(k: f64, r: f64, s_points: usize, n_points: usize) -> Result<Surface, String> {
    if s_points < 2 || n_points < 2 {
        return Err("a grid needs at least two points per axis".into());
    }
    let s_grid = linspace(0.0, 1.0, s_points);
    let n_grid = linspace(0.0, 4.0 * k, n_points);
    let grid = dqs_delta_surface(k, r, &s_grid, &n_grid).map_err(|e| e.to_string())?;
    let flat = grid.delta.iter().flatten();
    let min = flat.clone().copied().fold(f64::INFINITY, f64::min);
    let max = flat.copied().fold(f64::NEG_INFINITY, f64::max);
    let break_even = s_grid
        .iter()
        .map(|&s| (s < 1.0).then(|| break_even_steps(s, k, r)))
        .collect();
    Ok(Surface {
        s_grid: grid.s_grid,
        n_grid: grid.n_grid,
        delta: grid.delta,
        break_even,
        min,
        max,
    })
}

/// Net reward grid as JSON.
#[wasm_bindgen(js_name = deltaSurface)]
pub fn delta_surface_js(
    k: f64,
    r: f64,
    s_points: usize,
    n_points: usize,
) -> Result<String, JsError> {
    let s = surface(k, r, s_points, n_points).map_err(|e| JsError::new(&e))?;
    Ok(serde_json::to_string(&s).expect("surface serializes"))
}

/// Single DQS value for the hover readout.
#[wasm_bindgen(js_name = dqsAt)]
pub fn dqs_at(s: f64, n: f64, k: f64, r: f64) -> Result<f64, JsError> {
    let p = SeasonParams::new("demo", k, r)
        .map_err(|e| JsError::new(&e.to_string()))?
        .freeze();
    dqs(s, n, &p).map_err(|e| JsError::new(&e.to_string()))
}

#[derive(Debug, Serialize)]
pub struct CohortDraw {
    pub mode: Mode,
    pub corpus: Vec<u32>,
    pub stats: CorpusStats,
    pub cohort: CohortResult,
    /// Difficulties of the chosen items, in cohort order.
    pub chosen: Vec<u32>,
}

pub fn draw(
    mode: &str,
    n: usize,
    seed: u64,
    corpus_size: usize,
    corpus_seed: u64,
) -> Result<CohortDraw, String> {
    let mode: Mode = mode.parse()?;
    let (mu, sigma) = match mode {
        Mode::T2I => (22.4, 9.3),
        Mode::TI2I => (33.2, 14.6),
    };
    let corpus = synthetic_corpus(corpus_size, mu, sigma, corpus_seed);
    let stats = CorpusStats::of_corpus(&corpus).map_err(|e| e.to_string())?;
    let cohort = sample_cohort(&corpus, n, mode, seed).map_err(|e| e.to_string())?;
    let chosen = cohort
        .item_ids
        .iter()
        .map(|id| {
            corpus
                .iter()
                .find(|e| &e.id == id)
                .expect("cohort ids come from the corpus")
                .difficulty
        })
        .collect();
    Ok(CohortDraw {
        mode,
        corpus: corpus.iter().map(|e| e.difficulty).collect(),
        stats,
        cohort,
        chosen,
    })
}

/// One sampler draw over a synthetic corpus, as JSON.
#[wasm_bindgen(js_name = drawCohort)]
pub fn draw_cohort_js(
    mode: &str,
    n: usize,
    seed: u64,
    corpus_size: usize,
    corpus_seed: u64,
) -> Result<String, JsError> {
    let d = draw(mode, n, seed, corpus_size, corpus_seed).map_err(|e| JsError::new(&e))?;
    Ok(serde_json::to_string(&d).expect("draw serializes"))
}

/// A scored manifest with its metric raster.
#[wasm_bindgen]
pub struct Scored {
    report: String,
    width: usize,
    height: usize,
    gray: Vec<u8>,
}

#[wasm_bindgen]
impl Scored {
    /// Record plus design errors and text sets, as JSON.
    pub fn report(&self) -> String {
        self.report.clone()
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// RGBA bytes for `ImageData`.
    pub fn rgba(&self) -> Vec<u8> {
        self.gray.iter().flat_map(|&g| [g, g, g, 255]).collect()
    }
}

impl Scored {
    pub fn gray(&self) -> &[u8] {
        &self.gray
    }
}

/// Deterministic metrics for a manifest against newline-separated required
/// strings, with `steps` counted as successful drawing calls.
pub fn score(
    manifest: &str,
    required: &str,
    steps: usize,
    k: f64,
    r: f64,
) -> Result<Scored, String> {
    let document = parse_manifest(manifest.as_bytes()).map_err(|e| e.to_string())?;
    let required: Vec<&str> = required
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .collect();
    let id = match document.source_id() {
        "" => "browser",
        s => s,
    };
    let item: CorpusItem = serde_json::from_value(json!({
        "id": id,
        "mode": "T2I",
        "element_count": document.element_count().max(1),
        "description": "browser input",
        "required_text": required,
        "added_at": "2025-01-01",
    }))
    .map_err(|e| e.to_string())?;
    let params = SeasonParams::new("demo", k, r)
        .map_err(|e| e.to_string())?
        .freeze();
    let evaluator = Evaluator::deterministic();
    let grid = evaluator.render(&document).map_err(|e| e.to_string())?;
    let req = EvalRequest {
        item,
        system: "browser".into(),
        document,
        trace: TraceLog::new(
            vec![TraceEntry::ok("insert_shape"); steps],
            StepPolicy::default(),
        ),
        flags: ModeFlags::default(),
        weights: WeightProfile::standard(),
    };
    let detail = evaluator
        .evaluate_detailed(&req, &params)
        .map_err(|e| e.to_string())?;
    let record: &ScoreRecord = &detail.record;
    let report = json!({
        "record": record,
        "errors": detail.design.errors,
        "blank": detail.blank,
        "required": detail.required,
        "generated": detail.generated,
        "readable": detail.readability.readable,
    });
    Ok(Scored {
        report: report.to_string(),
        width: grid.width(),
        height: grid.height(),
        gray: grid.pixels().to_vec(),
    })
}

#[wasm_bindgen(js_name = scoreManifest)]
pub fn score_manifest_js(
    manifest: &str,
    required: &str,
    steps: usize,
    k: f64,
    r: f64,
) -> Result<Scored, JsError> {
    score(manifest, required, steps, k, r).map_err(|e| JsError::new(&e))
}
