//! Per-system summaries in the shape of a leaderboard table.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{MetricVector, ScoreRecord};
use crate::Mode;

/// Means over all records of one system in one mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub system: String,
    pub mode: Mode,
    pub records: usize,
    pub metrics: MetricVector,
    pub steps: f64,
    pub s: f64,
    pub dqs: f64,
}

/// Rows grouped by mode (T2I first), each block sorted by DQS descending.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Summary {
    pub rows: Vec<SummaryRow>,
}

#[derive(Default)]
struct Acc {
    count: usize,
    sums: [f64; 9],
}

pub fn summarize(records: &[ScoreRecord]) -> Summary {
    let mut groups: BTreeMap<(Mode, String), Acc> = BTreeMap::new();
    for r in records {
        let acc = groups.entry((r.mode, r.system.clone())).or_default();
        acc.count += 1;
        let m = &r.metrics;
        let vals = [
            m.precision,
            m.recall,
            m.design,
            m.blank,
            m.readability,
            m.align,
            r.n,
            r.s,
            r.dqs,
        ];
        for (sum, v) in acc.sums.iter_mut().zip(vals) {
            *sum += v;
        }
    }
    let mut rows: Vec<SummaryRow> = groups
        .into_iter()
        .map(|((mode, system), acc)| {
            let c = acc.count as f64;
            let mean = |i: usize| acc.sums[i] / c;
            SummaryRow {
                system,
                mode,
                records: acc.count,
                metrics: MetricVector::new(mean(0), mean(1), mean(2), mean(3), mean(4), mean(5)),
                steps: mean(6),
                s: mean(7),
                dqs: mean(8),
            }
        })
        .collect();
    rows.sort_by(|a, b| {
        a.mode
            .cmp(&b.mode)
            .then(b.dqs.total_cmp(&a.dqs))
            .then_with(|| a.system.cmp(&b.system))
    });
    Summary { rows }
}

impl Summary {
    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn mode_rows(&self, mode: Mode) -> impl Iterator<Item = &SummaryRow> {
        self.rows.iter().filter(move |r| r.mode == mode)
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!(
            "# {} schema={}\nsystem,mode,records,precision,recall,design,blank,readability,align,steps,s,dqs\n",
            crate::TOOL_VERSION,
            crate::SCHEMA_VERSION
        );
        for r in &self.rows {
            let m = &r.metrics;
            out.push_str(&format!(
                "{},{},{},{:.4},{:.4},{:.4},{:.4},{:.4},{:.4},{:.2},{:.4},{:.4}\n",
                csv_field(&r.system),
                r.mode,
                r.records,
                m.precision,
                m.recall,
                m.design,
                m.blank,
                m.readability,
                m.align,
                r.steps,
                r.s,
                r.dqs
            ));
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&serde_json::json!({
            "tool_version": crate::TOOL_VERSION,
            "schema_version": crate::SCHEMA_VERSION,
            "rows": self.rows,
        }))
        .expect("summary serializes")
    }

    /// Fixed-width text table.
    pub fn to_table(&self) -> String {
        let mut out = format!(
            "{:<20} {:<5} {:>5} {:>5} {:>6} {:>5} {:>5} {:>5} {:>7} {:>5} {:>5}\n",
            "system", "mode", "P", "R", "Design", "Blank", "Read", "Align", "Steps", "s", "DQS"
        );
        for r in &self.rows {
            let m = &r.metrics;
            out.push_str(&format!(
                "{:<20} {:<5} {:>5.2} {:>5.2} {:>6.2} {:>5.2} {:>5.2} {:>5.2} {:>7.2} {:>5.2} {:>5.2}\n",
                r.system, r.mode, m.precision, m.recall, m.design, m.blank, m.readability, m.align, r.steps, r.s, r.dqs
            ));
        }
        out
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scoring::Provenance;

    fn rec(system: &str, mode: Mode, n: f64, s: f64, dqs: f64) -> ScoreRecord {
        ScoreRecord {
            task_id: format!("{system}-{n}"),
            system: system.into(),
            mode,
            metrics: MetricVector::new(s, s, s, s, s, s),
            n,
            s,
            dqs,
            weights_id: "default".into(),
            season_id: "s".into(),
            provenance: Provenance::default(),
        }
    }

    #[test]
    fn groups_and_sorts() {
        let recs = vec![
            rec("a", Mode::T2I, 10.0, 0.5, 0.5),
            rec("a", Mode::T2I, 20.0, 0.7, 0.7),
            rec("b", Mode::T2I, 5.0, 0.9, 0.9),
            rec("c", Mode::TI2I, 5.0, 0.1, 0.1),
        ];
        let sum = summarize(&recs);
        let names: Vec<_> = sum
            .rows
            .iter()
            .map(|r| (r.system.as_str(), r.mode))
            .collect();
        assert_eq!(
            names,
            vec![("b", Mode::T2I), ("a", Mode::T2I), ("c", Mode::TI2I)]
        );
        let a = &sum.rows[1];
        assert_eq!(a.records, 2);
        assert!((a.steps - 15.0).abs() < 1e-12);
        assert!((a.metrics.precision - 0.6).abs() < 1e-12);
        assert_eq!(sum.to_csv().lines().count(), 5);
        assert!(summarize(&[]).is_empty());
    }
}
