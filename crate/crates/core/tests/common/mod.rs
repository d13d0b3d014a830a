#![allow(dead_code)]

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::{Arc, Mutex};
use std::thread;

use diagscore::scoring::MetricVector;
use diagscore::Mode;

pub mod oracles;

/// One published leaderboard row.
pub struct RefRow {
    pub system: &'static str,
    pub mode: Mode,
    pub metrics: [f64; 6],
    pub steps: f64,
    pub s: f64,
    pub dqs: f64,
}

impl RefRow {
    pub fn metric_vector(&self) -> MetricVector {
        let m = self.metrics;
        MetricVector::new(m[0], m[1], m[2], m[3], m[4], m[5])
    }
}

macro_rules! row {
    ($sys:expr, $mode:ident, [$($m:expr),*], $steps:expr, $s:expr, $dqs:expr) => {
        RefRow { system: $sys, mode: Mode::$mode, metrics: [$($m),*], steps: $steps, s: $s, dqs: $dqs }
    };
}

/// Leaderboard rows in published order: (precision, recall, design, blank,
/// readability, align), steps, base score, DQS.
pub const REFERENCE_ROWS: [RefRow; 18] = [
    row!(
        "Gemini-2.5-Pro",
        T2I,
        [0.92, 0.88, 0.53, 0.84, 0.89, 0.91],
        29.83,
        0.82,
        0.85
    ),
    row!(
        "GPT-5",
        T2I,
        [0.89, 0.83, 0.56, 0.88, 0.88, 0.90],
        26.90,
        0.81,
        0.84
    ),
    row!(
        "GPT-o3",
        T2I,
        [0.87, 0.78, 0.52, 0.79, 0.88, 0.93],
        23.43,
        0.79,
        0.82
    ),
    row!(
        "Claude-Opus-4",
        T2I,
        [0.89, 0.88, 0.44, 0.86, 0.82, 0.93],
        33.91,
        0.78,
        0.78
    ),
    row!(
        "GPT-4.1",
        T2I,
        [0.84, 0.80, 0.41, 0.80, 0.67, 0.93],
        27.05,
        0.71,
        0.70
    ),
    row!(
        "GPT-4o",
        T2I,
        [0.95, 0.52, 0.37, 0.72, 0.72, 0.89],
        19.51,
        0.67,
        0.68
    ),
    row!(
        "Qwen2.5-VL-72B",
        T2I,
        [0.78, 0.73, 0.40, 0.74, 0.72, 0.85],
        26.44,
        0.69,
        0.67
    ),
    row!(
        "Llama-4-Maverick",
        T2I,
        [0.82, 0.67, 0.37, 0.80, 0.79, 0.83],
        30.71,
        0.69,
        0.67
    ),
    row!(
        "Qwen-VL-Max",
        T2I,
        [0.76, 0.75, 0.41, 0.68, 0.69, 0.90],
        27.79,
        0.68,
        0.66
    ),
    row!(
        "GPT-5",
        TI2I,
        [0.77, 0.70, 0.56, 0.86, 0.84, 0.92],
        44.19,
        0.75,
        0.77
    ),
    row!(
        "Gemini-2.5-Pro",
        TI2I,
        [0.81, 0.72, 0.50, 0.87, 0.81, 0.92],
        46.72,
        0.74,
        0.75
    ),
    row!(
        "GPT-o3",
        TI2I,
        [0.73, 0.65, 0.46, 0.85, 0.78, 0.93],
        32.26,
        0.70,
        0.73
    ),
    row!(
        "Claude-Opus-4",
        TI2I,
        [0.75, 0.63, 0.47, 0.88, 0.83, 0.93],
        47.85,
        0.71,
        0.71
    ),
    row!(
        "GPT-4o",
        TI2I,
        [0.84, 0.44, 0.40, 0.82, 0.73, 0.90],
        29.88,
        0.65,
        0.67
    ),
    row!(
        "GPT-4.1",
        TI2I,
        [0.73, 0.59, 0.42, 0.79, 0.65, 0.90],
        31.31,
        0.64,
        0.65
    ),
    row!(
        "Qwen-VL-Max",
        TI2I,
        [0.73, 0.41, 0.39, 0.79, 0.81, 0.87],
        36.83,
        0.64,
        0.63
    ),
    row!(
        "Qwen2.5-VL-72B",
        TI2I,
        [0.68, 0.45, 0.35, 0.82, 0.72, 0.88],
        36.30,
        0.61,
        0.59
    ),
    row!(
        "Llama-4-Maverick",
        TI2I,
        [0.62, 0.47, 0.31, 0.81, 0.74, 0.86],
        37.71,
        0.59,
        0.57
    ),
];

/// Published equal-weight scores, in published listing order.
pub const EQUAL_WEIGHT_T2I: [(&str, f64); 9] = [
    ("Gemini-2.5-Pro", 0.83),
    ("GPT-5", 0.82),
    ("GPT-o3", 0.79),
    ("Claude-Opus-4", 0.77),
    ("GPT-4.1", 0.74),
    ("GPT-4o", 0.71),
    ("Qwen2.5-VL-72B", 0.70),
    ("Llama-4-Maverick", 0.70),
    ("Qwen-VL-Max", 0.69),
];

pub const EQUAL_WEIGHT_TI2I: [(&str, f64); 9] = [
    ("GPT-5", 0.78),
    ("Gemini-2.5-Pro", 0.77),
    ("Claude-Opus-4", 0.75),
    ("GPT-o3", 0.73),
    ("GPT-4o", 0.69),
    ("GPT-4.1", 0.63),
    ("Qwen-VL-Max", 0.67),
    ("Qwen2.5-VL-72B", 0.65),
    ("Llama-4-Maverick", 0.63),
];

pub fn block(mode: Mode) -> impl Iterator<Item = &'static RefRow> {
    REFERENCE_ROWS.iter().filter(move |r| r.mode == mode)
}

/// Column means of one block: (mean steps, 1 − mean base score).
pub fn block_k_r(mode: Mode) -> (f64, f64) {
    let rows: Vec<_> = block(mode).collect();
    let n = rows.len() as f64;
    let k = rows.iter().map(|r| r.steps).sum::<f64>() / n;
    let r = 1.0 - rows.iter().map(|r| r.s).sum::<f64>() / n;
    (k, r)
}

/// SHA-256 of the exact design-error instruction text.
pub const DESIGN_INSTRUCTION_SHA256: &str =
    "552b0db7d90b8316f58b94df9aac346ee8c75eebc1eae0bb672b3eaa02d710cf";

/// Requests seen by [`MockJudge`].
#[derive(Default)]
pub struct MockState {
    pub requests: Vec<serde_json::Value>,
    pub auth: Vec<Option<String>>,
}

/// Minimal HTTP/1.1 chat-completions endpoint. Replies cycle through
/// `replies`; an entry starting with `status:` answers with that status.
pub struct MockJudge {
    pub url: String,
    pub state: Arc<Mutex<MockState>>,
}

impl MockJudge {
    pub fn start(replies: Vec<String>) -> Self {
        let listener = TcpListener::bind("127.0.0.1:0").expect("bind mock judge");
        let url = format!(
            "http://{}/v1/chat/completions",
            listener.local_addr().unwrap()
        );
        let state = Arc::new(Mutex::new(MockState::default()));
        let shared = state.clone();
        thread::spawn(move || {
            let mut i = 0usize;
            for stream in listener.incoming() {
                let Ok(mut stream) = stream else { break };
                let mut reader = BufReader::new(stream.try_clone().unwrap());
                let mut content_length = 0usize;
                let mut auth = None;
                let mut line = String::new();
                if reader.read_line(&mut line).unwrap_or(0) == 0 {
                    continue;
                }
                loop {
                    line.clear();
                    if reader.read_line(&mut line).unwrap_or(0) == 0 || line == "\r\n" {
                        break;
                    }
                    let lower = line.to_ascii_lowercase();
                    if let Some(v) = lower.strip_prefix("content-length:") {
                        content_length = v.trim().parse().unwrap_or(0);
                    }
                    if lower.starts_with("authorization:") {
                        auth = Some(line["authorization:".len()..].trim().to_string());
                    }
                }
                let mut body = vec![0u8; content_length];
                if reader.read_exact(&mut body).is_err() {
                    continue;
                }
                let value: serde_json::Value =
                    serde_json::from_slice(&body).unwrap_or(serde_json::Value::Null);
                {
                    let mut st = shared.lock().unwrap();
                    st.requests.push(value);
                    st.auth.push(auth);
                }
                let reply = if replies.is_empty() {
                    "0".to_string()
                } else {
                    replies[i % replies.len()].clone()
                };
                i += 1;
                let (status, payload) = match reply.strip_prefix("status:") {
                    Some(code) => (code.trim().to_string(), "{\"error\":\"mock\"}".to_string()),
                    None => (
                        "200".to_string(),
                        serde_json::json!({"choices": [{"message": {"role": "assistant", "content": reply}}]})
                            .to_string(),
                    ),
                };
                let resp = format!(
                    "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{payload}",
                    payload.len()
                );
                let _ = stream.write_all(resp.as_bytes());
                let _ = stream.flush();
            }
        });
        MockJudge { url, state }
    }

    pub fn request_count(&self) -> usize {
        self.state.lock().unwrap().requests.len()
    }

    pub fn instruction(&self, i: usize) -> Option<String> {
        self.state.lock().unwrap().requests.get(i)?["messages"][0]["content"][0]["text"]
            .as_str()
            .map(str::to_string)
    }
}

/// A closed local port: connecting fails immediately.
pub fn dead_endpoint() -> String {
    let l = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = l.local_addr().unwrap();
    drop(l);
    format!("http://{addr}/v1/chat/completions")
}
