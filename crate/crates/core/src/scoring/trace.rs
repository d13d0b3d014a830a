//! Interaction traces and step counting.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::ScoringError;

/// Tools counted as atomic drawing commands unless configured otherwise.
pub const DEFAULT_STEP_TOOLS: [&str; 8] = [
    "insert_shape",
    "insert_line",
    "insert_text",
    "set_format",
    "move_shape",
    "align_shapes",
    "connect_shapes",
    "delete_shape",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TraceStatus {
    Ok,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub tool: String,
    #[serde(default)]
    pub args: Value,
    pub status: TraceStatus,
    #[serde(default)]
    pub timestamp: Option<String>,
}

impl TraceEntry {
    pub fn ok(tool: impl Into<String>) -> Self {
        TraceEntry {
            tool: tool.into(),
            args: Value::Null,
            status: TraceStatus::Ok,
            timestamp: None,
        }
    }

    pub fn failed(tool: impl Into<String>) -> Self {
        TraceEntry {
            status: TraceStatus::Error,
            ..Self::ok(tool)
        }
    }
}

/// The set of tool names that count as steps.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepPolicy {
    pub tools: BTreeSet<String>,
}

impl Default for StepPolicy {
    fn default() -> Self {
        StepPolicy {
            tools: DEFAULT_STEP_TOOLS.iter().map(|t| t.to_string()).collect(),
        }
    }
}

impl StepPolicy {
    pub fn new<I, S>(tools: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        StepPolicy {
            tools: tools.into_iter().map(Into::into).collect(),
        }
    }

    pub fn counts(&self, tool: &str) -> bool {
        self.tools.contains(tool)
    }
}

/// Ordered tool calls from one generation episode.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TraceLog {
    pub entries: Vec<TraceEntry>,
    pub policy: StepPolicy,
}

impl TraceLog {
    pub fn new(entries: Vec<TraceEntry>, policy: StepPolicy) -> Self {
        TraceLog { entries, policy }
    }

    /// One JSON object per non-blank line.
    pub fn from_jsonl(text: &str, policy: StepPolicy) -> Result<Self, ScoringError> {
        let mut entries = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let entry: TraceEntry = serde_json::from_str(line)
                .map_err(|e| ScoringError::MalformedTrace(format!("line {}: {e}", i + 1)))?;
            entries.push(entry);
        }
        Ok(TraceLog { entries, policy })
    }

    pub fn to_jsonl(&self) -> String {
        self.entries
            .iter()
            .map(|e| serde_json::to_string(e).expect("trace entry serializes") + "\n")
            .collect()
    }
}

/// Successful calls to whitelisted tools.
pub fn count_steps(trace: &TraceLog) -> Result<usize, ScoringError> {
    let mut n = 0;
    for (i, e) in trace.entries.iter().enumerate() {
        if e.tool.trim().is_empty() {
            return Err(ScoringError::MalformedTrace(format!(
                "entry {i} has an empty tool name"
            )));
        }
        if e.status == TraceStatus::Ok && trace.policy.counts(&e.tool) {
            n += 1;
        }
    }
    Ok(n)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn filters_by_status_and_whitelist() {
        let mut entries: Vec<_> = [
            "insert_shape",
            "insert_text",
            "move_shape",
            "connect_shapes",
            "set_format",
        ]
        .into_iter()
        .map(TraceEntry::ok)
        .collect();
        entries.insert(2, TraceEntry::ok("screenshot"));
        entries.push(TraceEntry::ok("screenshot"));
        entries.push(TraceEntry::failed("insert_line"));
        let trace = TraceLog::new(entries, StepPolicy::default());
        assert_eq!(count_steps(&trace).unwrap(), 5);
        assert_eq!(count_steps(&TraceLog::default()).unwrap(), 0);
    }

    #[test]
    fn empty_tool_is_malformed() {
        let trace = TraceLog::new(vec![TraceEntry::ok("")], StepPolicy::default());
        assert!(matches!(
            count_steps(&trace),
            Err(ScoringError::MalformedTrace(_))
        ));
    }

    #[test]
    fn jsonl_round_trip() {
        let text = "{\"tool\":\"insert_shape\",\"args\":{\"w\":3},\"status\":\"ok\",\"timestamp\":\"t0\"}\n\n\
                    {\"tool\":\"get_state\",\"status\":\"error\"}\n";
        let trace = TraceLog::from_jsonl(text, StepPolicy::default()).unwrap();
        assert_eq!(trace.entries.len(), 2);
        let again = TraceLog::from_jsonl(&trace.to_jsonl(), StepPolicy::default()).unwrap();
        assert_eq!(again, trace);
        assert!(TraceLog::from_jsonl("{\"tool\":1}", StepPolicy::default()).is_err());
    }
}
