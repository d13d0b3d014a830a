//! Content-level metrics: precision and recall of rendered text.

use std::collections::BTreeSet;

/// Normalized text sets for one task.
///
/// `required` is `P` from task metadata, `generated` is `G` extracted from the
/// document, `readable` is `R` from the readability check.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ContentSets {
    pub required: BTreeSet<String>,
    pub generated: BTreeSet<String>,
    pub readable: BTreeSet<String>,
}

impl ContentSets {
    pub fn new(required: BTreeSet<String>, generated: BTreeSet<String>) -> Self {
        ContentSets {
            required,
            generated,
            readable: BTreeSet::new(),
        }
    }

    /// Attach `R`, intersected with `G`.
    pub fn with_readable(mut self, readable: BTreeSet<String>) -> Self {
        self.readable = readable.intersection(&self.generated).cloned().collect();
        self
    }

    pub fn precision(&self) -> f64 {
        precision(&self.required, &self.generated)
    }

    pub fn recall(&self) -> f64 {
        recall(&self.required, &self.generated)
    }
}

/// `|P ∩ G| / |G|`. An empty `G` scores 0 unless `P` is empty too.
pub fn precision(required: &BTreeSet<String>, generated: &BTreeSet<String>) -> f64 {
    if generated.is_empty() {
        return if required.is_empty() { 1.0 } else { 0.0 };
    }
    required.intersection(generated).count() as f64 / generated.len() as f64
}

/// `|P ∩ G| / |P|`. An empty requirement is vacuously met.
pub fn recall(required: &BTreeSet<String>, generated: &BTreeSet<String>) -> f64 {
    if required.is_empty() {
        return 1.0;
    }
    required.intersection(generated).count() as f64 / required.len() as f64
}
