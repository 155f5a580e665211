//! Grounder and planner access.
//!
//! Every model call goes through a [`ChatClient`]: one prompt plus one image
//! in, reply text out. Remote endpoints, record/replay cassettes and scripted
//! mocks all implement it, so search code never knows which one it talks to.

mod cassette;
mod payload;
mod parse;
mod remote;
mod scripted;

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use self::cassette::{Cassette, CassetteClient, CassetteMode, CassetteRecord};
pub use self::payload::ImagePayload;
pub use self::parse::{
    coordinate_groups, format_reply, parse_prediction, GroupPick, OutputConvention, ParseError, ParsedPrediction,
};
pub use self::remote::{HttpTransport, RemoteChat, Transport, TransportError};
pub use self::scripted::{
    NamedBox, ReplySpec, SceneTask, Script, ScriptEntry, ScriptPurpose, ScriptedChat, ViewportMatch,
};

use crate::{PixelBox, Point};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BackendError {
    #[error("backend unavailable after {attempts} attempt(s): {message}")]
    Unavailable { attempts: u32, message: String },
    #[error("could not parse grounder reply ({reason}): {raw:?}")]
    Parse { raw: String, reason: ParseError },
    #[error("request {request_sha256} not found in cassette")]
    CassetteMiss { request_sha256: String },
    #[error("cassette: {0}")]
    Cassette(String),
    #[error("no scripted reply for {0}")]
    ScriptMiss(String),
    #[error("image: {0}")]
    Image(String),
    #[error("invalid backend configuration: {0}")]
    Config(String),
}

/// Connection settings for one remote model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BackendConfig {
    pub endpoint: String,
    pub model: String,
    /// Name of the environment variable holding the API key.
    pub api_key_env: Option<String>,
    pub temperature: f64,
    pub timeout_secs: f64,
    pub max_retries: u32,
    /// Base delay between retries, doubled after each failure.
    pub retry_backoff_ms: u64,
}

impl Default for BackendConfig {
    fn default() -> Self {
        Self {
            endpoint: "https://api.openai.com/v1/chat/completions".into(),
            model: String::new(),
            api_key_env: None,
            temperature: 0.0,
            timeout_secs: 120.0,
            max_retries: 2,
            retry_backoff_ms: 500,
        }
    }
}

impl BackendConfig {
    pub fn validate(&self) -> Result<(), BackendError> {
        if !(self.timeout_secs > 0.0) {
            return Err(BackendError::Config("timeout_secs must be > 0".into()));
        }
        if !self.temperature.is_finite() || self.temperature < 0.0 {
            return Err(BackendError::Config("temperature must be a non-negative number".into()));
        }
        if self.endpoint.is_empty() {
            return Err(BackendError::Config("endpoint is empty".into()));
        }
        Ok(())
    }
}

/// What a request is for. Not sent over the wire; scripted backends use it to
/// pick a reply without parsing the prompt.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Purpose<'a> {
    Ground { instruction: &'a str },
    PositionInference { instruction: &'a str },
    ResultCheck { instruction: &'a str },
    Other,
}

impl Purpose<'_> {
    pub fn instruction(&self) -> Option<&str> {
        match self {
            Purpose::Ground { instruction }
            | Purpose::PositionInference { instruction }
            | Purpose::ResultCheck { instruction } => Some(instruction),
            Purpose::Other => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ChatRequest<'a> {
    pub model: &'a str,
    pub prompt: &'a str,
    pub image: &'a ImagePayload,
    pub temperature: f64,
    pub purpose: Purpose<'a>,
}

impl ChatRequest<'_> {
    /// Content hash of everything that is sent to the model.
    pub fn sha256(&self) -> String {
        let canonical = serde_json::json!({
            "image_sha256": self.image.digest(),
            "model": self.model,
            "prompt": self.prompt,
            "temperature": self.temperature,
        });
        hex::encode(Sha256::digest(canonical.to_string().as_bytes()))
    }
}

pub trait ChatClient: Send + Sync {
    fn chat(&self, req: &ChatRequest<'_>) -> Result<String, BackendError>;

    /// False for clients whose replies depend on call order.
    fn concurrent(&self) -> bool {
        true
    }
}

/// Parsed answer of a grounder for one image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundingOutcome {
    /// Local coordinates of the queried image.
    pub prediction: Point,
    /// Local box when the model answered with one.
    pub bbox: Option<PixelBox>,
    pub raw_text: String,
    pub parsed_as: OutputConvention,
    pub overflow: bool,
}

/// A grounding model behind a chat client.
#[derive(Clone)]
pub struct Grounder {
    client: Arc<dyn ChatClient>,
    model: String,
    temperature: f64,
    convention: OutputConvention,
    pick: GroupPick,
    prompt_template: String,
}

impl Grounder {
    pub fn new(client: Arc<dyn ChatClient>, model: impl Into<String>, convention: OutputConvention) -> Self {
        Self {
            client,
            model: model.into(),
            temperature: 0.0,
            convention,
            pick: GroupPick::First,
            prompt_template: "{instruction}".into(),
        }
    }

    pub fn with_temperature(mut self, t: f64) -> Self {
        self.temperature = t;
        self
    }

    pub fn with_pick(mut self, pick: GroupPick) -> Self {
        self.pick = pick;
        self
    }

    /// Prompt wrapper around the instruction; must contain `{instruction}`.
    pub fn with_prompt_template(mut self, template: impl Into<String>) -> Self {
        self.prompt_template = template.into();
        self
    }

    pub fn model(&self) -> &str {
        &self.model
    }

    pub fn convention(&self) -> OutputConvention {
        self.convention
    }

    pub fn concurrent(&self) -> bool {
        self.client.concurrent()
    }

    /// One grounding call. The prediction is in `image`'s local coordinates.
    pub fn ground(&self, instruction: &str, image: &ImagePayload) -> Result<GroundingOutcome, BackendError> {
        if instruction.trim().is_empty() {
            return Err(BackendError::Config("empty instruction".into()));
        }
        let prompt = self.prompt_template.replacen("{instruction}", instruction, 1);
        let req = ChatRequest {
            model: &self.model,
            prompt: &prompt,
            image,
            temperature: self.temperature,
            purpose: Purpose::Ground { instruction },
        };
        let raw = self.client.chat(&req)?;
        let parsed = parse_prediction(&raw, self.convention, image.size(), self.pick)
            .map_err(|reason| BackendError::Parse { raw: raw.clone(), reason })?;
        Ok(GroundingOutcome {
            prediction: parsed.point,
            bbox: parsed.bbox,
            raw_text: raw,
            parsed_as: self.convention,
            overflow: parsed.overflow,
        })
    }
}

/// A general-purpose vision-language model used for text replies.
#[derive(Clone)]
pub struct Planner {
    client: Arc<dyn ChatClient>,
    model: String,
    temperature: f64,
}

impl Planner {
    pub fn new(client: Arc<dyn ChatClient>, model: impl Into<String>) -> Self {
        Self {
            client,
            model: model.into(),
            temperature: 0.0,
        }
    }

    pub fn with_temperature(mut self, t: f64) -> Self {
        self.temperature = t;
        self
    }

    pub fn model(&self) -> &str {
        &self.model
    }

    pub fn concurrent(&self) -> bool {
        self.client.concurrent()
    }

    pub fn complete(&self, prompt: &str, image: &ImagePayload, purpose: Purpose<'_>) -> Result<String, BackendError> {
        if prompt.trim().is_empty() {
            return Err(BackendError::Config("empty prompt".into()));
        }
        self.client.chat(&ChatRequest {
            model: &self.model,
            prompt,
            image,
            temperature: self.temperature,
            purpose,
        })
    }
}
