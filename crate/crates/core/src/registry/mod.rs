//! Corpus registry with a seasonal staging lifecycle.
//!
//! Items enter through the staging pool of the current season and become
//! sampleable only after [`Registry::advance_season`]. Monthly cohorts are
//! pre-committed from the active pool with seeds derived from the season's
//! master seed, and never change once written.

mod store;

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::path::PathBuf;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sampler::{
    sample_cohort, CohortResult, CorpusEntry, SamplerError, MAX_COHORT, MIN_COHORT,
};
use crate::scoring::SeasonParams;
use crate::Mode;

#[derive(Debug, Error)]
pub enum RegistryError {
    #[error("item id '{0}' is already registered")]
    DuplicateId(String),
    #[error("item '{id}' is invalid: {reason}")]
    InvalidItem { id: String, reason: String },
    #[error("season '{season}' has {committed} of {declared} monthly cohorts committed")]
    SeasonIncomplete {
        season: String,
        committed: usize,
        declared: usize,
    },
    #[error("{mode} pool has {available} active items, cohorts need {needed}")]
    InsufficientCorpus {
        mode: Mode,
        needed: usize,
        available: usize,
    },
    #[error("invalid cohort split: {0}")]
    InvalidSplit(String),
    #[error("committed cohorts for month {0} differ from a fresh draw")]
    CohortsImmutable(u32),
    #[error("{mode} parameters for season '{season}' are already frozen")]
    ParamsFrozen { season: String, mode: Mode },
    #[error("season parameters must be frozen before they are stored")]
    UnfrozenParams,
    #[error("sampler: {0}")]
    Sampler(#[from] SamplerError),
    #[error("registry io at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("registry file {path} is malformed: {reason}")]
    Format { path: PathBuf, reason: String },
}

/// One annotated benchmark task.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusItem {
    pub id: String,
    pub mode: Mode,
    /// Difficulty: the number of elements in the reference diagram.
    pub element_count: u32,
    pub description: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_image: Option<PathBuf>,
    /// Strings the generated diagram must contain.
    #[serde(default)]
    pub required_text: BTreeSet<String>,
    #[serde(default)]
    pub license_url: String,
    pub added_at: NaiveDate,
}

impl CorpusItem {
    pub fn validate(&self) -> Result<(), RegistryError> {
        let invalid = |reason: &str| RegistryError::InvalidItem {
            id: self.id.clone(),
            reason: reason.into(),
        };
        if self.id.trim().is_empty() {
            return Err(invalid("empty id"));
        }
        if self.element_count < 1 {
            return Err(invalid("element_count must be at least 1"));
        }
        match (self.mode, &self.reference_image) {
            (Mode::TI2I, None) => Err(invalid("TI2I items need a reference_image")),
            (Mode::T2I, Some(_)) => Err(invalid("T2I items must not carry a reference_image")),
            _ => Ok(()),
        }
    }

    pub fn corpus_entry(&self) -> CorpusEntry {
        CorpusEntry::new(self.id.clone(), self.element_count)
    }
}

/// Per-mode cohort sizes for one month.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CohortSplit {
    pub t2i: usize,
    pub ti2i: usize,
}

impl Default for CohortSplit {
    fn default() -> Self {
        CohortSplit { t2i: 15, ti2i: 15 }
    }
}

impl CohortSplit {
    pub fn size(&self, mode: Mode) -> usize {
        match mode {
            Mode::T2I => self.t2i,
            Mode::TI2I => self.ti2i,
        }
    }
}

pub const DEFAULT_MONTHS: u32 = 12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Season {
    pub schema_version: u32,
    pub season_id: String,
    pub master_seed: u64,
    pub months: u32,
    pub active_pool: Vec<String>,
    pub staging_pool: Vec<String>,
    /// month (1-based) → mode → cohort.
    pub committed_cohorts: BTreeMap<u32, BTreeMap<Mode, CohortResult>>,
    #[serde(default)]
    pub params: BTreeMap<Mode, SeasonParams>,
}

impl Season {
    fn new(season_id: String, master_seed: u64, active_pool: Vec<String>) -> Self {
        Season {
            schema_version: crate::SCHEMA_VERSION,
            season_id,
            master_seed,
            months: DEFAULT_MONTHS,
            active_pool,
            staging_pool: Vec::new(),
            committed_cohorts: BTreeMap::new(),
            params: BTreeMap::new(),
        }
    }

    pub fn is_complete(&self) -> bool {
        (1..=self.months).all(|m| self.committed_cohorts.contains_key(&m))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("season serializes") + "\n"
    }
}

/// SplitMix64 finaliser, used for all seed derivation.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for one (month, mode) draw.
pub fn month_seed(master_seed: u64, month: u32, mode: Mode) -> u64 {
    let tag = match mode {
        Mode::T2I => 1u64,
        Mode::TI2I => 2u64,
    };
    splitmix64(splitmix64(master_seed ^ (month as u64)) ^ tag)
}

/// Item catalog plus the ordered history of seasons (last is current).
#[derive(Debug, Clone, PartialEq)]
pub struct Registry {
    items: Vec<CorpusItem>,
    index: BTreeMap<String, usize>,
    seasons: Vec<Season>,
}

impl Registry {
    /// First season with `items` as its active pool.
    pub fn bootstrap(
        season_id: impl Into<String>,
        master_seed: u64,
        items: Vec<CorpusItem>,
    ) -> Result<Self, RegistryError> {
        let mut reg = Registry {
            items: Vec::new(),
            index: BTreeMap::new(),
            seasons: Vec::new(),
        };
        let ids = reg.add_items(items)?;
        reg.seasons
            .push(Season::new(season_id.into(), master_seed, ids));
        Ok(reg)
    }

    fn add_items(&mut self, items: Vec<CorpusItem>) -> Result<Vec<String>, RegistryError> {
        let mut batch = HashSet::new();
        for item in &items {
            item.validate()?;
            if self.index.contains_key(&item.id) || !batch.insert(item.id.as_str()) {
                return Err(RegistryError::DuplicateId(item.id.clone()));
            }
        }
        let mut ids = Vec::with_capacity(items.len());
        for item in items {
            ids.push(item.id.clone());
            self.index.insert(item.id.clone(), self.items.len());
            self.items.push(item);
        }
        Ok(ids)
    }

    pub fn items(&self) -> &[CorpusItem] {
        &self.items
    }

    pub fn item(&self, id: &str) -> Option<&CorpusItem> {
        self.index.get(id).map(|&i| &self.items[i])
    }

    pub fn current(&self) -> &Season {
        self.seasons.last().expect("registry has a season")
    }

    fn current_mut(&mut self) -> &mut Season {
        self.seasons.last_mut().expect("registry has a season")
    }

    /// All seasons, oldest first.
    pub fn seasons(&self) -> &[Season] {
        &self.seasons
    }

    pub fn season(&self, id: &str) -> Option<&Season> {
        self.seasons.iter().find(|s| s.season_id == id)
    }

    /// Add new items to the current season's staging pool.
    pub fn stage_items(&mut self, items: Vec<CorpusItem>) -> Result<&Season, RegistryError> {
        let ids = self.add_items(items)?;
        self.current_mut().staging_pool.extend(ids);
        Ok(self.current())
    }

    /// Active-pool entries of one mode, in pool order.
    pub fn active_corpus(&self, mode: Mode) -> Vec<CorpusEntry> {
        self.current()
            .active_pool
            .iter()
            .filter_map(|id| self.item(id))
            .filter(|it| it.mode == mode)
            .map(CorpusItem::corpus_entry)
            .collect()
    }

    /// Draw every month's cohorts. Months already committed must match a
    /// fresh draw exactly, which makes the call idempotent for a fixed seed.
    pub fn precommit_cohorts(
        &mut self,
        months: u32,
        split: CohortSplit,
    ) -> Result<&Season, RegistryError> {
        if months == 0 {
            return Err(RegistryError::InvalidSplit(
                "months must be at least 1".into(),
            ));
        }
        for mode in Mode::ALL {
            let n = split.size(mode);
            if !(MIN_COHORT..=MAX_COHORT).contains(&n) {
                return Err(RegistryError::InvalidSplit(format!(
                    "{mode} cohort size {n} is outside [{MIN_COHORT}, {MAX_COHORT}]"
                )));
            }
        }
        let pools: BTreeMap<Mode, Vec<CorpusEntry>> = Mode::ALL
            .iter()
            .map(|&m| (m, self.active_corpus(m)))
            .collect();
        for (&mode, pool) in &pools {
            if pool.len() < split.size(mode) {
                return Err(RegistryError::InsufficientCorpus {
                    mode,
                    needed: split.size(mode),
                    available: pool.len(),
                });
            }
        }
        let seed = self.current().master_seed;
        let mut fresh = BTreeMap::new();
        for month in 1..=months {
            let mut by_mode = BTreeMap::new();
            for (&mode, pool) in &pools {
                by_mode.insert(
                    mode,
                    sample_cohort(pool, split.size(mode), mode, month_seed(seed, month, mode))?,
                );
            }
            fresh.insert(month, by_mode);
        }
        let season = self.current_mut();
        for (month, cohorts) in &fresh {
            if let Some(existing) = season.committed_cohorts.get(month) {
                if existing != cohorts {
                    return Err(RegistryError::CohortsImmutable(*month));
                }
            }
        }
        season.months = months;
        for (month, cohorts) in fresh {
            season.committed_cohorts.entry(month).or_insert(cohorts);
        }
        Ok(self.current())
    }

    /// Store frozen DQS parameters for one mode of the current season.
    pub fn freeze_params(
        &mut self,
        mode: Mode,
        params: SeasonParams,
    ) -> Result<&Season, RegistryError> {
        if !params.is_frozen() {
            return Err(RegistryError::UnfrozenParams);
        }
        let season = self.current_mut();
        if let Some(old) = season.params.get(&mode) {
            if *old != params {
                return Err(RegistryError::ParamsFrozen {
                    season: season.season_id.clone(),
                    mode,
                });
            }
        }
        season.params.insert(mode, params);
        Ok(self.current())
    }

    /// Close the current season and open `new_id`, whose active pool is the
    /// old active pool followed by the old staging pool.
    pub fn advance_season(&mut self, new_id: impl Into<String>) -> Result<&Season, RegistryError> {
        let old = self.current();
        if !old.is_complete() {
            return Err(RegistryError::SeasonIncomplete {
                season: old.season_id.clone(),
                committed: old.committed_cohorts.len(),
                declared: old.months as usize,
            });
        }
        let new_id = new_id.into();
        if self.season(&new_id).is_some() {
            return Err(RegistryError::DuplicateId(new_id));
        }
        let mut active = old.active_pool.clone();
        active.extend(old.staging_pool.iter().cloned());
        let seed = splitmix64(old.master_seed);
        self.seasons.push(Season::new(new_id, seed, active));
        Ok(self.current())
    }
}

pub use store::{RegistryStore, ITEMS_FILE, META_FILE, SEASONS_DIR};

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn item(id: &str, mode: Mode, count: u32) -> CorpusItem {
        CorpusItem {
            id: id.into(),
            mode,
            element_count: count,
            description: format!("task {id}"),
            reference_image: (mode == Mode::TI2I).then(|| PathBuf::from(format!("refs/{id}.png"))),
            required_text: BTreeSet::new(),
            license_url: "https://example.org/license".into(),
            added_at: NaiveDate::from_ymd_opt(2025, 1, 1).unwrap(),
        }
    }

    fn pool(prefix: &str, per_mode: usize) -> Vec<CorpusItem> {
        let mut v = Vec::new();
        for i in 0..per_mode {
            v.push(item(
                &format!("{prefix}t{i:03}"),
                Mode::T2I,
                5 + (i as u32 * 7) % 40,
            ));
            v.push(item(
                &format!("{prefix}i{i:03}"),
                Mode::TI2I,
                8 + (i as u32 * 11) % 50,
            ));
        }
        v
    }

    #[test]
    fn item_validation() {
        let mut t = item("a", Mode::T2I, 3);
        assert!(t.validate().is_ok());
        t.reference_image = Some("x.png".into());
        assert!(t.validate().is_err());
        let mut i = item("b", Mode::TI2I, 3);
        i.reference_image = None;
        assert!(i.validate().is_err());
        assert!(item("c", Mode::T2I, 0).validate().is_err());
    }

    #[test]
    fn staging_keeps_active_pool() {
        let mut reg = Registry::bootstrap("s1", 7, pool("a", 20)).unwrap();
        let before = reg.current().active_pool.clone();
        reg.stage_items(pool("b", 5)).unwrap();
        assert_eq!(reg.current().active_pool, before);
        assert_eq!(reg.current().staging_pool.len(), 10);
        assert!(matches!(
            reg.stage_items(vec![item("at000", Mode::T2I, 4)]),
            Err(RegistryError::DuplicateId(_))
        ));
        assert!(matches!(
            reg.stage_items(vec![item("z", Mode::T2I, 4), item("z", Mode::T2I, 4)]),
            Err(RegistryError::DuplicateId(_))
        ));
        assert_eq!(reg.current().staging_pool.len(), 10);
    }

    #[test]
    fn precommit_is_idempotent_and_advance_unions() {
        let mut reg = Registry::bootstrap("s1", 42, pool("a", 30)).unwrap();
        reg.stage_items(pool("b", 4)).unwrap();
        assert!(matches!(
            reg.advance_season("s2"),
            Err(RegistryError::SeasonIncomplete { .. })
        ));
        let first = reg
            .precommit_cohorts(3, CohortSplit::default())
            .unwrap()
            .to_json();
        let again = reg
            .precommit_cohorts(3, CohortSplit::default())
            .unwrap()
            .to_json();
        assert_eq!(first, again);
        for cohorts in reg.current().committed_cohorts.values() {
            let mut ids = BTreeSet::new();
            for c in cohorts.values() {
                assert_eq!(c.item_ids.len(), 15);
                for id in &c.item_ids {
                    assert!(ids.insert(id.clone()));
                    assert!(!reg.current().staging_pool.contains(id));
                }
            }
        }
        reg.advance_season("s2").unwrap();
        assert_eq!(reg.current().active_pool.len(), 68);
        assert!(reg.current().staging_pool.is_empty());
        assert_eq!(reg.season("s1").unwrap().committed_cohorts.len(), 3);
        assert_ne!(reg.current().master_seed, 42);
    }

    #[test]
    fn precommit_errors() {
        let mut reg = Registry::bootstrap("s1", 1, pool("a", 10)).unwrap();
        assert!(matches!(
            reg.precommit_cohorts(2, CohortSplit::default()),
            Err(RegistryError::InsufficientCorpus { .. })
        ));
        assert!(matches!(
            reg.precommit_cohorts(2, CohortSplit { t2i: 25, ti2i: 5 }),
            Err(RegistryError::InvalidSplit(_))
        ));
    }

    #[test]
    fn tampered_cohort_is_detected() {
        let mut reg = Registry::bootstrap("s1", 9, pool("a", 20)).unwrap();
        reg.precommit_cohorts(2, CohortSplit { t2i: 10, ti2i: 10 })
            .unwrap();
        reg.current_mut()
            .committed_cohorts
            .get_mut(&1)
            .unwrap()
            .get_mut(&Mode::T2I)
            .unwrap()
            .item_ids
            .pop();
        assert!(matches!(
            reg.precommit_cohorts(2, CohortSplit { t2i: 10, ti2i: 10 }),
            Err(RegistryError::CohortsImmutable(1))
        ));
    }

    #[test]
    fn params_freeze_once() {
        let mut reg = Registry::bootstrap("s1", 1, pool("a", 5)).unwrap();
        let p = SeasonParams::new("s1", 20.0, 0.3).unwrap();
        assert!(matches!(
            reg.freeze_params(Mode::T2I, p.clone()),
            Err(RegistryError::UnfrozenParams)
        ));
        reg.freeze_params(Mode::T2I, p.clone().freeze()).unwrap();
        reg.freeze_params(Mode::T2I, p.freeze()).unwrap();
        let other = SeasonParams::new("s1", 21.0, 0.3).unwrap().freeze();
        assert!(matches!(
            reg.freeze_params(Mode::T2I, other),
            Err(RegistryError::ParamsFrozen { .. })
        ));
    }
}
