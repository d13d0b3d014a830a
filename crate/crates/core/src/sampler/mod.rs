//! Difficulty-balanced cohort sampling.
//!
//! A cohort `S` of size `n` is chosen to minimise
//! `J(S) = |μ_S − μ| + λ·|σ_S − σ|` over element-count difficulties, using
//! stratified initialisation followed by greedy swap refinement. All
//! standard deviations are population standard deviations.

mod mc;

use std::collections::HashSet;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use mc::{monte_carlo_validate, McReport, McRow, MC_N_VALUES};

use crate::Mode;

pub const MIN_COHORT: usize = 5;
pub const MAX_COHORT: usize = 20;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SamplerError {
    #[error("subset is empty")]
    EmptySubset,
    #[error("cohort size {0} is outside [{MIN_COHORT}, {MAX_COHORT}]")]
    CohortSize(usize),
    #[error("corpus has {available} items, need at least {needed}")]
    CorpusTooSmall { needed: usize, available: usize },
    #[error("invalid sampler configuration: {0}")]
    InvalidConfig(String),
    #[error("corpus id '{0}' appears more than once")]
    DuplicateId(String),
    #[error("cohort member '{0}' is not in the corpus")]
    UnknownId(String),
}

/// One candidate item and its difficulty (element count).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusEntry {
    pub id: String,
    pub difficulty: u32,
}

impl CorpusEntry {
    pub fn new(id: impl Into<String>, difficulty: u32) -> Self {
        CorpusEntry {
            id: id.into(),
            difficulty,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub mu: f64,
    pub sigma: f64,
}

impl CorpusStats {
    pub fn new(mu: f64, sigma: f64) -> Self {
        CorpusStats { mu, sigma }
    }

    pub fn of(difficulties: impl IntoIterator<Item = u32>) -> Result<Self, SamplerError> {
        let (mut m, mut sum, mut sq) = (0u64, 0u64, 0u128);
        for d in difficulties {
            m += 1;
            sum += d as u64;
            sq += (d as u128) * (d as u128);
        }
        if m == 0 {
            return Err(SamplerError::EmptySubset);
        }
        Ok(moments(m, sum, sq))
    }

    pub fn of_corpus(corpus: &[CorpusEntry]) -> Result<Self, SamplerError> {
        Self::of(corpus.iter().map(|e| e.difficulty))
    }
}

/// Mean and population std from exact integer sums.
fn moments(m: u64, sum: u64, sq: u128) -> CorpusStats {
    let mf = m as f64;
    let mu = sum as f64 / mf;
    // m·Σx² − (Σx)² is exact in integers and never negative.
    let num = (m as u128) * sq - (sum as u128) * (sum as u128);
    CorpusStats {
        mu,
        sigma: (num as f64).sqrt() / mf,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub kappa: f64,
    pub strata: usize,
    pub eps_k: f64,
    pub max_rounds: usize,
    pub proposals_per_round: usize,
}

impl SamplerConfig {
    pub fn for_mode(mode: Mode) -> Self {
        match mode {
            Mode::T2I => SamplerConfig {
                kappa: 1.5,
                strata: 7,
                eps_k: 0.10,
                max_rounds: 3,
                proposals_per_round: 200,
            },
            Mode::TI2I => SamplerConfig {
                kappa: 1.8,
                strata: 10,
                eps_k: 0.05,
                max_rounds: 3,
                proposals_per_round: 200,
            },
        }
    }

    pub fn validate(&self) -> Result<(), SamplerError> {
        if !(self.kappa > 0.0) {
            return Err(SamplerError::InvalidConfig(format!(
                "kappa = {}",
                self.kappa
            )));
        }
        if self.strata == 0 {
            return Err(SamplerError::InvalidConfig(
                "strata must be at least 1".into(),
            ));
        }
        if !(self.eps_k > 0.0) {
            return Err(SamplerError::InvalidConfig(format!(
                "eps_k = {}",
                self.eps_k
            )));
        }
        Ok(())
    }

    /// Convergence threshold `ε = eps_k · σ · (20 / n)`.
    pub fn epsilon(&self, stats: &CorpusStats, n: usize) -> f64 {
        self.eps_k * stats.sigma * (20.0 / n as f64)
    }
}

/// `λ = κ·σ / (μ + 1e-6)`.
pub fn adaptive_lambda(stats: &CorpusStats, kappa: f64) -> f64 {
    kappa * stats.sigma / (stats.mu + 1e-6)
}

/// `J(S) = |μ_S − μ| + λ·|σ_S − σ|`.
pub fn objective_j(subset: &[u32], stats: &CorpusStats, lambda: f64) -> Result<f64, SamplerError> {
    let s = CorpusStats::of(subset.iter().copied())?;
    Ok(j_of(&s, stats, lambda))
}

fn j_of(subset: &CorpusStats, stats: &CorpusStats, lambda: f64) -> f64 {
    (subset.mu - stats.mu).abs() + lambda * (subset.sigma - stats.sigma).abs()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortResult {
    /// Members in ascending id order.
    pub item_ids: Vec<String>,
    pub mu_s: f64,
    pub sigma_s: f64,
    pub j: f64,
    pub lambda: f64,
    pub epsilon: f64,
    /// `j <= epsilon` at termination.
    pub converged: bool,
    pub proposals: usize,
    pub accepted: usize,
    pub seed_used: u64,
}

fn check_size(n: usize) -> Result<(), SamplerError> {
    if (MIN_COHORT..=MAX_COHORT).contains(&n) {
        Ok(())
    } else {
        Err(SamplerError::CohortSize(n))
    }
}

fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

/// Corpus indices ordered by `(difficulty, id)`, split into `l` quantile
/// strata: the item at sorted rank `i` of `m` lands in stratum `⌊i·l/m⌋`.
pub fn strata(corpus: &[CorpusEntry], l: usize) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..corpus.len()).collect();
    order.sort_by(|&a, &b| {
        (corpus[a].difficulty, &corpus[a].id).cmp(&(corpus[b].difficulty, &corpus[b].id))
    });
    let m = order.len();
    let mut out = vec![Vec::new(); l.max(1)];
    for (rank, idx) in order.into_iter().enumerate() {
        out[rank * l / m].push(idx);
    }
    out
}

/// Items drawn from each of `l` strata for a cohort of `n`: every stratum
/// gets `⌊n/l⌋`, and the `n mod l` extra items go to evenly spaced strata
/// `⌊(j + ½)·l / (n mod l)⌋`. With `n < l` this picks `n` spread-out strata.
pub fn stratum_quotas(n: usize, l: usize) -> Vec<usize> {
    let mut q = vec![n / l; l];
    let rem = n % l;
    for j in 0..rem {
        q[((2 * j + 1) * l) / (2 * rem)] += 1;
    }
    q
}

fn validate_corpus(corpus: &[CorpusEntry]) -> Result<(), SamplerError> {
    let mut seen = HashSet::with_capacity(corpus.len());
    for e in corpus {
        if !seen.insert(e.id.as_str()) {
            return Err(SamplerError::DuplicateId(e.id.clone()));
        }
    }
    Ok(())
}

/// Stage one: quota draws from quantile strata, without replacement.
/// A stratum short of its quota passes the deficit to the nearest stratum
/// with spare items (lower index on ties).
pub fn stratified_init(
    corpus: &[CorpusEntry],
    n: usize,
    l: usize,
    seed: u64,
) -> Result<Vec<String>, SamplerError> {
    check_size(n)?;
    if l == 0 {
        return Err(SamplerError::InvalidConfig(
            "strata must be at least 1".into(),
        ));
    }
    if corpus.len() < n {
        return Err(SamplerError::CorpusTooSmall {
            needed: n,
            available: corpus.len(),
        });
    }
    validate_corpus(corpus)?;
    let bins = strata(corpus, l);
    let mut quota = stratum_quotas(n, l);
    for i in 0..l {
        let deficit = quota[i].saturating_sub(bins[i].len());
        for _ in 0..deficit {
            quota[i] -= 1;
            let target = (1..l)
                .flat_map(|d| [i.checked_sub(d), Some(i + d)])
                .flatten()
                .find(|&t| t < l && quota[t] < bins[t].len())
                .expect("corpus holds at least n items");
            quota[target] += 1;
        }
    }
    let mut r = rng(seed, 0);
    let mut picked = Vec::with_capacity(n);
    for (bin, &q) in bins.iter().zip(&quota) {
        for k in index::sample(&mut r, bin.len(), q) {
            picked.push(corpus[bin[k]].id.clone());
        }
    }
    Ok(picked)
}

/// Stage two: random in/out swaps, accepted only when `J` strictly drops.
/// Runs at most `max_rounds · proposals_per_round` proposals and stops as
/// soon as `J <= ε`.
pub fn refine_greedy(
    initial: &[String],
    corpus: &[CorpusEntry],
    stats: &CorpusStats,
    cfg: &SamplerConfig,
    seed: u64,
) -> Result<CohortResult, SamplerError> {
    cfg.validate()?;
    if initial.is_empty() {
        return Err(SamplerError::EmptySubset);
    }
    validate_corpus(corpus)?;
    let n = initial.len();
    let lambda = adaptive_lambda(stats, cfg.kappa);
    let epsilon = cfg.epsilon(stats, n);

    let mut in_set = vec![false; corpus.len()];
    let mut members = Vec::with_capacity(n);
    for id in initial {
        let idx = corpus
            .iter()
            .position(|e| &e.id == id)
            .ok_or_else(|| SamplerError::UnknownId(id.clone()))?;
        if in_set[idx] {
            return Err(SamplerError::DuplicateId(id.clone()));
        }
        in_set[idx] = true;
        members.push(idx);
    }
    let mut outside: Vec<usize> = (0..corpus.len()).filter(|&i| !in_set[i]).collect();

    let d = |i: usize| corpus[i].difficulty as u64;
    let mut sum: u64 = members.iter().map(|&i| d(i)).sum();
    let mut sq: u128 = members.iter().map(|&i| (d(i) as u128).pow(2)).sum();
    let m = n as u64;
    let mut j = j_of(&moments(m, sum, sq), stats, lambda);

    let mut r = rng(seed, 1);
    let budget = cfg.max_rounds * cfg.proposals_per_round;
    let (mut proposals, mut accepted) = (0, 0);
    while j > epsilon && proposals < budget && !outside.is_empty() {
        proposals += 1;
        let a = r.random_range(0..members.len());
        let b = r.random_range(0..outside.len());
        let (old, new) = (d(members[a]), d(outside[b]));
        let cand_sum = sum - old + new;
        let cand_sq = sq - (old as u128).pow(2) + (new as u128).pow(2);
        let cand_j = j_of(&moments(m, cand_sum, cand_sq), stats, lambda);
        if cand_j < j {
            std::mem::swap(&mut members[a], &mut outside[b]);
            sum = cand_sum;
            sq = cand_sq;
            j = cand_j;
            accepted += 1;
        }
    }

    let final_stats = moments(m, sum, sq);
    let mut item_ids: Vec<String> = members.iter().map(|&i| corpus[i].id.clone()).collect();
    item_ids.sort();
    Ok(CohortResult {
        item_ids,
        mu_s: final_stats.mu,
        sigma_s: final_stats.sigma,
        j,
        lambda,
        epsilon,
        converged: j <= epsilon,
        proposals,
        accepted,
        seed_used: seed,
    })
}

/// Both stages with the mode's default configuration.
pub fn sample_cohort(
    corpus: &[CorpusEntry],
    n: usize,
    mode: Mode,
    seed: u64,
) -> Result<CohortResult, SamplerError> {
    sample_cohort_with(corpus, n, &SamplerConfig::for_mode(mode), seed)
}

pub fn sample_cohort_with(
    corpus: &[CorpusEntry],
    n: usize,
    cfg: &SamplerConfig,
    seed: u64,
) -> Result<CohortResult, SamplerError> {
    cfg.validate()?;
    let init = stratified_init(corpus, n, cfg.strata, seed)?;
    let stats = CorpusStats::of_corpus(corpus)?;
    refine_greedy(&init, corpus, &stats, cfg, seed)
}

/// `size` synthetic items whose element counts are normal draws rescaled
/// to exactly `mu` and `sigma`, then rounded and floored at 1. The rounded
/// corpus moments are close to, not equal to, the targets.
pub fn synthetic_corpus(size: usize, mu: f64, sigma: f64, seed: u64) -> Vec<CorpusEntry> {
    use rand_distr::{Distribution, StandardNormal};
    let mut r = rng(seed, 7);
    let z: Vec<f64> = (0..size).map(|_| StandardNormal.sample(&mut r)).collect();
    let zs = if size > 1 {
        let m = z.iter().sum::<f64>() / size as f64;
        let sd = (z.iter().map(|v| (v - m).powi(2)).sum::<f64>() / size as f64).sqrt();
        z.iter().map(|v| (v - m) / sd).collect()
    } else {
        vec![0.0; size]
    };
    let width = size.to_string().len().max(3);
    zs.into_iter()
        .enumerate()
        .map(|(i, v)| {
            CorpusEntry::new(
                format!("syn-{i:0width$}"),
                (mu + sigma * v).round().max(1.0) as u32,
            )
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn corpus(ds: &[u32]) -> Vec<CorpusEntry> {
        ds.iter()
            .enumerate()
            .map(|(i, &d)| CorpusEntry::new(format!("c{i:03}"), d))
            .collect()
    }

    #[test]
    fn lambda_values() {
        assert!((adaptive_lambda(&CorpusStats::new(22.4, 9.3), 1.5) - 0.622767).abs() < 1e-5);
        assert!((adaptive_lambda(&CorpusStats::new(33.2, 14.6), 1.8) - 0.791566).abs() < 1e-5);
        assert_eq!(adaptive_lambda(&CorpusStats::new(5.0, 0.0), 1.5), 0.0);
    }

    #[test]
    fn objective_values() {
        let st = CorpusStats::new(10.0, 2.0);
        assert_eq!(objective_j(&[8, 12], &st, 0.5).unwrap(), 0.0);
        assert!((objective_j(&[10, 10], &st, 0.5).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(objective_j(&[], &st, 0.5), Err(SamplerError::EmptySubset));
    }

    #[test]
    fn quotas() {
        assert_eq!(stratum_quotas(14, 7), vec![2; 7]);
        assert_eq!(stratum_quotas(5, 7).iter().filter(|&&q| q == 1).count(), 5);
        assert_eq!(stratum_quotas(15, 7).iter().sum::<usize>(), 15);
        assert_eq!(stratum_quotas(5, 10), vec![0, 1, 0, 1, 0, 1, 0, 1, 0, 1]);
    }

    #[test]
    fn init_respects_strata() {
        let c = corpus(&(1..=70).collect::<Vec<_>>());
        let ids = stratified_init(&c, 14, 7, 3).unwrap();
        let bins = strata(&c, 7);
        for bin in &bins {
            let hits = bin.iter().filter(|&&i| ids.contains(&c[i].id)).count();
            assert_eq!(hits, 2);
        }
    }

    #[test]
    fn deficit_spills() {
        // 7 strata of a 7-item corpus hold one item each.
        let c = corpus(&[1, 2, 3, 4, 5, 6, 7]);
        let mut ids = stratified_init(&c, 7, 3, 1).unwrap();
        ids.sort();
        assert_eq!(ids.len(), 7);
        let c8 = corpus(&[1, 1, 1, 1, 1, 1, 9, 9]);
        assert_eq!(stratified_init(&c8, 6, 4, 0).unwrap().len(), 6);
    }

    #[test]
    fn size_and_corpus_errors() {
        let c = corpus(&[1, 2, 3]);
        assert_eq!(
            sample_cohort(&c, 4, Mode::T2I, 0),
            Err(SamplerError::CohortSize(4))
        );
        assert_eq!(
            sample_cohort(&c, 30, Mode::T2I, 0),
            Err(SamplerError::CohortSize(30))
        );
        assert_eq!(
            sample_cohort(&c, 5, Mode::T2I, 0),
            Err(SamplerError::CorpusTooSmall {
                needed: 5,
                available: 3
            })
        );
    }

    #[test]
    fn refinement_never_worsens() {
        let c = synthetic_corpus(60, 22.4, 9.3, 11);
        let stats = CorpusStats::of_corpus(&c).unwrap();
        let cfg = SamplerConfig::for_mode(Mode::T2I);
        for seed in 0..20 {
            let init = stratified_init(&c, 8, 7, seed).unwrap();
            let ds: Vec<u32> = init
                .iter()
                .map(|id| c.iter().find(|e| &e.id == id).unwrap().difficulty)
                .collect();
            let j0 = objective_j(&ds, &stats, adaptive_lambda(&stats, cfg.kappa)).unwrap();
            let res = refine_greedy(&init, &c, &stats, &cfg, seed).unwrap();
            assert!(res.j <= j0);
            assert_eq!(res.item_ids.len(), 8);
        }
    }

    #[test]
    fn early_stop_when_already_converged() {
        let c = corpus(&[5; 30]);
        let stats = CorpusStats::of_corpus(&c).unwrap();
        let init = stratified_init(&c, 6, 7, 0).unwrap();
        let res = refine_greedy(&init, &c, &stats, &SamplerConfig::for_mode(Mode::T2I), 0).unwrap();
        assert!(res.converged);
        assert_eq!(res.proposals, 0);
        let mut sorted = init.clone();
        sorted.sort();
        assert_eq!(res.item_ids, sorted);
    }

    #[test]
    fn synthetic_moments_near_target() {
        let c = synthetic_corpus(180, 22.4, 9.3, 5);
        let st = CorpusStats::of_corpus(&c).unwrap();
        assert!((st.mu - 22.4).abs() < 0.2);
        assert!((st.sigma - 9.3).abs() < 0.2);
    }
}
