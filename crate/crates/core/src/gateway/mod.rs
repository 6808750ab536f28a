//! Chat-completion boundary: the backend trait, a scripted backend for
//! deterministic runs, an OpenAI-compatible HTTP client, and schema-validated
//! completion with bounded repair retries.

mod remote;
mod scripted;
mod validated;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::model::{ModelError, Role};

pub use remote::{RemoteBackend, DEFAULT_MODEL};
pub use scripted::{CapturedCall, Playbook, PlaybookEntry, PlaybookMatch, ScriptedBackend};
pub use validated::{complete_validated, repair_message, ValidatedCompletion, DEFAULT_MAX_REPAIRS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChatRole {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: ChatRole,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        Self { role: ChatRole::System, content: content.into() }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self { role: ChatRole::User, content: content.into() }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Self { role: ChatRole::Assistant, content: content.into() }
    }
}

/// Routing information for a request; never sent over the wire.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct RequestMeta {
    pub session: String,
    pub role: Option<Role>,
    /// Index of the step record the call belongs to.
    pub step: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub messages: Vec<ChatMessage>,
    pub model: String,
    pub temperature: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_tokens: Option<u32>,
    #[serde(skip)]
    pub meta: RequestMeta,
}

impl ChatRequest {
    pub fn new(messages: Vec<ChatMessage>) -> Self {
        Self { messages, model: DEFAULT_MODEL.to_string(), temperature: 0.0, max_tokens: None, meta: RequestMeta::default() }
    }

    pub fn with_meta(mut self, session: &str, role: Role, step: u64) -> Self {
        self.meta = RequestMeta { session: session.to_string(), role: Some(role), step };
        self
    }

    pub fn last_user_message(&self) -> Option<&str> {
        self.messages.iter().rev().find(|m| m.role == ChatRole::User).map(|m| m.content.as_str())
    }

    pub fn check(&self) -> Result<(), GatewayError> {
        match self.messages.first() {
            None => Err(GatewayError::InvalidRequest("request has no messages".into())),
            Some(m) if m.role != ChatRole::System => {
                Err(GatewayError::InvalidRequest("first message must be the system prompt".into()))
            }
            Some(_) => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GatewayError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("rate limited (retry after {retry_after:?} s)")]
    RateLimited { retry_after: Option<u64> },
    #[error("playbook has no entry for role {role} at step {step}")]
    PlaybookExhausted { role: String, step: u64 },
    #[error("no valid response after repairs: {last_error}")]
    ValidationExhausted { last_error: ModelError },
    #[error("invalid request: {0}")]
    InvalidRequest(String),
}

/// Anything that turns a chat request into assistant text.
pub trait ChatBackend: Send + Sync {
    fn complete(&self, request: &ChatRequest) -> Result<String, GatewayError>;

    /// Per-session backend state that must travel with checkpoints.
    fn export_state(&self, _session: &str) -> Option<Value> {
        None
    }

    fn import_state(&self, _session: &str, _state: Option<&Value>) {}
}
