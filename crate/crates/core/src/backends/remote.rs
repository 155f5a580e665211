use std::sync::Arc;
use std::time::Duration;

use serde_json::{json, Value};

use super::{BackendConfig, BackendError, ChatClient, ChatRequest};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TransportError {
    #[error("request timed out")]
    Timeout,
    #[error("HTTP {0}: {1}")]
    Status(u16, String),
    #[error("{0}")]
    Io(String),
}

/// Minimal HTTP surface used by [`RemoteChat`]; swapped out in tests.
pub trait Transport: Send + Sync {
    fn post_json(
        &self,
        url: &str,
        bearer: Option<&str>,
        body: &str,
        timeout: Duration,
    ) -> Result<String, TransportError>;
}

/// Blocking HTTPS transport.
pub struct HttpTransport {
    client: reqwest::blocking::Client,
}

impl HttpTransport {
    pub fn new() -> Result<Self, BackendError> {
        let client = reqwest::blocking::Client::builder()
            .build()
            .map_err(|e| BackendError::Config(format!("http client: {}", e)))?;
        Ok(Self { client })
    }
}

impl Transport for HttpTransport {
    fn post_json(
        &self,
        url: &str,
        bearer: Option<&str>,
        body: &str,
        timeout: Duration,
    ) -> Result<String, TransportError> {
        let mut req = self
            .client
            .post(url)
            .timeout(timeout)
            .header(reqwest::header::CONTENT_TYPE, "application/json")
            .body(body.to_string());
        if let Some(key) = bearer {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(|e| {
            if e.is_timeout() {
                TransportError::Timeout
            } else {
                TransportError::Io(e.to_string())
            }
        })?;
        let status = resp.status();
        let text = resp.text().map_err(|e| TransportError::Io(e.to_string()))?;
        if !status.is_success() {
            return Err(TransportError::Status(status.as_u16(), text));
        }
        Ok(text)
    }
}

/// OpenAI-compatible chat-completions client.
pub struct RemoteChat {
    cfg: BackendConfig,
    transport: Arc<dyn Transport>,
}

impl RemoteChat {
    pub fn new(cfg: BackendConfig, transport: Arc<dyn Transport>) -> Result<Self, BackendError> {
        cfg.validate()?;
        Ok(Self { cfg, transport })
    }

    pub fn config(&self) -> &BackendConfig {
        &self.cfg
    }

    /// JSON body: one user message with a text part and an inline PNG part.
    pub fn request_body(req: &ChatRequest<'_>) -> Value {
        json!({
            "model": req.model,
            "temperature": req.temperature,
            "messages": [{
                "role": "user",
                "content": [
                    { "type": "text", "text": req.prompt },
                    { "type": "image_url", "image_url": { "url": req.image.data_url() } }
                ]
            }]
        })
    }

    /// Reply text of the first choice. Accepts both string content and the
    /// list-of-parts form.
    pub fn reply_text(body: &str) -> Result<String, String> {
        let v: Value = serde_json::from_str(body).map_err(|e| format!("reply is not JSON: {}", e))?;
        let content = &v["choices"][0]["message"]["content"];
        match content {
            Value::String(s) => Ok(s.clone()),
            Value::Array(parts) => Ok(parts
                .iter()
                .filter_map(|p| p["text"].as_str())
                .collect::<Vec<_>>()
                .join("")),
            _ => Err(format!("reply has no message content: {}", body)),
        }
    }

    fn api_key(&self) -> Result<Option<String>, BackendError> {
        match &self.cfg.api_key_env {
            None => Ok(None),
            Some(var) => std::env::var(var)
                .map(Some)
                .map_err(|_| BackendError::Config(format!("environment variable {} is not set", var))),
        }
    }
}

impl ChatClient for RemoteChat {
    fn chat(&self, req: &ChatRequest<'_>) -> Result<String, BackendError> {
        let key = self.api_key()?;
        let body = Self::request_body(req).to_string();
        let timeout = Duration::from_secs_f64(self.cfg.timeout_secs);
        let attempts = self.cfg.max_retries + 1;
        let mut last = String::new();
        for attempt in 0..attempts {
            if attempt > 0 && self.cfg.retry_backoff_ms > 0 {
                let delay = self.cfg.retry_backoff_ms.saturating_mul(1 << (attempt - 1).min(10));
                std::thread::sleep(Duration::from_millis(delay));
            }
            match self.transport.post_json(&self.cfg.endpoint, key.as_deref(), &body, timeout) {
                Ok(text) => match Self::reply_text(&text) {
                    Ok(reply) => return Ok(reply),
                    Err(e) => last = e,
                },
                Err(e) => last = e.to_string(),
            }
        }
        Err(BackendError::Unavailable {
            attempts,
            message: last,
        })
    }
}
