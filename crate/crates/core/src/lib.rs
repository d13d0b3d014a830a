//! Evaluation engine and cohort manager for high-information-density
//! scientific diagrams.
//!
//! The crate is organised the way a scoring run flows:
//!
//! * [`document`] parses vector diagrams (JSON manifest or an SVG subset) and
//!   rasterizes them onto a grayscale grid.
//! * [`content`], [`layout`] and [`perceptual`] compute the six `[0, 1]`
//!   metrics (precision, recall, design, blank, readability, align).
//! * [`judge`] talks to external vision-language judges, with an on-disk
//!   response cache and repeat-run averaging.
//! * [`scoring`] aggregates metrics into the base score `s`, counts steps from
//!   interaction traces and computes the Dynamic Quality Score (DQS).
//! * [`sampler`] draws difficulty-balanced cohorts and validates the sampler
//!   by Monte-Carlo repetition.
//! * [`registry`] persists the corpus and enforces the seasonal
//!   staging/freeze lifecycle.
//! * [`pipeline`] ties everything together for one task or a batch.

// `!(x >= 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod content;
pub mod document;
pub mod judge;
pub mod layout;
pub mod perceptual;
pub mod pipeline;
pub mod registry;
pub mod sampler;
pub mod scoring;

mod mode;

pub use mode::Mode;

/// Version string embedded in every file this crate writes.
pub const TOOL_VERSION: &str = concat!("diagscore ", env!("CARGO_PKG_VERSION"));

/// Schema version for all persisted JSON / CSV outputs.
pub const SCHEMA_VERSION: u32 = 1;
