//! Monte-Carlo stability check for the sampler.

use serde::{Deserialize, Serialize};

use super::{sample_cohort_with, CorpusEntry, CorpusStats, SamplerConfig, SamplerError};
use crate::Mode;

pub const MC_N_VALUES: [usize; 6] = [5, 6, 10, 12, 15, 20];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McRow {
    pub n: usize,
    /// `|mean of cohort means − μ|`.
    pub delta: f64,
    /// Population std of cohort means.
    pub sigma_mean: f64,
    /// `max |μ_S − μ|` over repeats.
    pub worst: f64,
    pub cohort_means: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McReport {
    pub mode: Mode,
    pub repeats: usize,
    pub seed: u64,
    pub stats: CorpusStats,
    pub rows: Vec<McRow>,
}

/// Repeat `r` runs the sampler with seed `seed + r`.
pub fn monte_carlo_validate(
    corpus: &[CorpusEntry],
    mode: Mode,
    n_values: &[usize],
    repeats: usize,
    seed: u64,
) -> Result<McReport, SamplerError> {
    let cfg = SamplerConfig::for_mode(mode);
    let stats = CorpusStats::of_corpus(corpus)?;
    let mut rows = Vec::with_capacity(n_values.len());
    for &n in n_values {
        let cohort_means = (0..repeats as u64)
            .map(|r| sample_cohort_with(corpus, n, &cfg, seed.wrapping_add(r)).map(|c| c.mu_s))
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(row_from_means(n, stats.mu, cohort_means));
    }
    Ok(McReport {
        mode,
        repeats,
        seed,
        stats,
        rows,
    })
}

fn row_from_means(n: usize, mu: f64, cohort_means: Vec<f64>) -> McRow {
    let count = cohort_means.len().max(1) as f64;
    let mean = cohort_means.iter().sum::<f64>() / count;
    let var = cohort_means.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / count;
    let worst = cohort_means
        .iter()
        .map(|m| (m - mu).abs())
        .fold(0.0, f64::max);
    McRow {
        n,
        delta: if cohort_means.is_empty() {
            0.0
        } else {
            (mean - mu).abs()
        },
        sigma_mean: var.sqrt(),
        worst,
        cohort_means,
    }
}

impl McReport {
    pub fn row(&self, n: usize) -> Option<&McRow> {
        self.rows.iter().find(|r| r.n == n)
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!(
            "# {} schema={} mode={} R={} seed={} mu={} sigma={}\nmode,n,delta,sigma_mean,worst\n",
            crate::TOOL_VERSION,
            crate::SCHEMA_VERSION,
            self.mode,
            self.repeats,
            self.seed,
            self.stats.mu,
            self.stats.sigma
        );
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{:.4},{:.4},{:.4}\n",
                self.mode, r.n, r.delta, r.sigma_mean, r.worst
            ));
        }
        out
    }
}
