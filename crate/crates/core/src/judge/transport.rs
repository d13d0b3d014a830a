use base64::Engine;
use serde_json::{json, Value};

/// One judge call: an instruction plus a PNG image.
#[derive(Debug, Clone)]
pub struct JudgeRequest<'a> {
    pub model: &'a str,
    pub instruction: &'a str,
    pub image_png: &'a [u8],
    pub temperature: f64,
}

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum TransportError {
    #[error("request failed: {0}")]
    Network(String),
    #[error("endpoint returned status {status}: {body}")]
    Status { status: u16, body: String },
    #[error("unexpected response shape: {0}")]
    BadResponse(String),
}

/// Anything that can carry a judge request to a model and return its text.
pub trait JudgeTransport: Send + Sync {
    fn complete(&self, request: &JudgeRequest<'_>) -> Result<String, TransportError>;
}

/// Packs a request into a vendor body and pulls the reply text back out.
pub trait JudgeAdapter: Send + Sync {
    fn build_body(&self, request: &JudgeRequest<'_>) -> Value;
    fn extract_text(&self, response: &Value) -> Option<String>;
}

/// Chat-completions shaped body with the image as a base64 data URL.
#[derive(Debug, Default, Clone, Copy)]
pub struct ChatCompletionsAdapter;

impl JudgeAdapter for ChatCompletionsAdapter {
    fn build_body(&self, request: &JudgeRequest<'_>) -> Value {
        let image = base64::engine::general_purpose::STANDARD.encode(request.image_png);
        json!({
            "model": request.model,
            "temperature": request.temperature,
            "messages": [{
                "role": "user",
                "content": [
                    {"type": "text", "text": request.instruction},
                    {"type": "image_url", "image_url": {"url": format!("data:image/png;base64,{image}")}}
                ]
            }]
        })
    }

    fn extract_text(&self, response: &Value) -> Option<String> {
        let content = response.pointer("/choices/0/message/content")?;
        match content {
            Value::String(s) => Some(s.clone()),
            // Some vendors return a list of typed parts.
            Value::Array(parts) => Some(
                parts
                    .iter()
                    .filter_map(|p| p.get("text").and_then(Value::as_str))
                    .collect::<Vec<_>>()
                    .join(""),
            ),
            _ => None,
        }
    }
}

#[cfg(feature = "http")]
pub use http::HttpTransport;

#[cfg(feature = "http")]
mod http {
    use std::time::Duration;

    use super::*;

    /// Blocking HTTP transport posting JSON to a single endpoint.
    pub struct HttpTransport {
        endpoint: String,
        api_key: Option<String>,
        agent: ureq::Agent,
        adapter: Box<dyn JudgeAdapter>,
    }

    impl HttpTransport {
        pub fn new(
            endpoint: impl Into<String>,
            api_key: Option<String>,
            timeout: Duration,
        ) -> Self {
            Self::with_adapter(endpoint, api_key, timeout, Box::new(ChatCompletionsAdapter))
        }

        pub fn with_adapter(
            endpoint: impl Into<String>,
            api_key: Option<String>,
            timeout: Duration,
            adapter: Box<dyn JudgeAdapter>,
        ) -> Self {
            let agent = ureq::Agent::config_builder()
                .timeout_global(Some(timeout))
                .http_status_as_error(false)
                .build()
                .into();
            HttpTransport {
                endpoint: endpoint.into(),
                api_key,
                agent,
                adapter,
            }
        }
    }

    impl JudgeTransport for HttpTransport {
        fn complete(&self, request: &JudgeRequest<'_>) -> Result<String, TransportError> {
            let body = self.adapter.build_body(request);
            let mut req = self
                .agent
                .post(&self.endpoint)
                .header("Content-Type", "application/json");
            if let Some(key) = &self.api_key {
                req = req.header("Authorization", &format!("Bearer {key}"));
            }
            let mut resp = req
                .send(body.to_string().as_bytes())
                .map_err(|e| TransportError::Network(e.to_string()))?;
            let status = resp.status().as_u16();
            let text = resp
                .body_mut()
                .read_to_string()
                .map_err(|e| TransportError::Network(e.to_string()))?;
            if !(200..300).contains(&status) {
                return Err(TransportError::Status { status, body: text });
            }
            let value: Value = serde_json::from_str(&text)
                .map_err(|e| TransportError::BadResponse(e.to_string()))?;
            self.adapter
                .extract_text(&value)
                .ok_or_else(|| TransportError::BadResponse("no message content".into()))
        }
    }
}
