//! Versioned frame schema shared by the WebSocket stream and the console.
//!
//! Every frame is `{"v": 1, "kind": ..., "body": ...}`. Outbound kinds are
//! `step`, `rollback`, `status`, `ack`, `rejected` and `error`; the only
//! inbound kind is `command`.

use cola_core::orchestrator::{ArchivedBranch, Command, SessionStatus, StepRecord};
use serde::{Deserialize, Serialize};
use serde_json::Value;

pub const WIRE_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    pub v: u32,
    pub kind: String,
    pub body: Value,
}

/// Body of a `rollback` frame: the live log now ends at `step` and the
/// records after it moved to `archived`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RollbackBody {
    pub step: u64,
    pub archived: ArchivedBranch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RejectedBody {
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum WireError {
    #[error("malformed frame: {0}")]
    Malformed(String),
    #[error("unsupported wire version {0}")]
    Version(u32),
    #[error("unknown frame kind `{0}`")]
    UnknownKind(String),
}

impl Frame {
    fn new(kind: &str, body: impl Serialize) -> Self {
        Self { v: WIRE_VERSION, kind: kind.to_string(), body: serde_json::to_value(body).expect("frame bodies serialize") }
    }

    pub fn step(record: &StepRecord) -> Self {
        Self::new("step", record)
    }

    pub fn rollback(step: u64, archived: &ArchivedBranch) -> Self {
        Self::new("rollback", RollbackBody { step, archived: archived.clone() })
    }

    pub fn status(status: &SessionStatus) -> Self {
        Self::new("status", status)
    }

    pub fn ack(command: &Command) -> Self {
        Self::new("ack", command)
    }

    pub fn rejected(reason: impl Into<String>) -> Self {
        Self::new("rejected", RejectedBody { reason: reason.into() })
    }

    pub fn error(message: impl Into<String>) -> Self {
        Self::new("error", serde_json::json!({ "message": message.into() }))
    }

    pub fn command(command: &Command) -> Self {
        Self::new("command", command)
    }

    pub fn to_text(&self) -> String {
        serde_json::to_string(self).expect("frames serialize")
    }

    /// The step record carried by a `step` frame.
    pub fn as_step(&self) -> Option<StepRecord> {
        (self.kind == "step").then(|| serde_json::from_value(self.body.clone()).ok()).flatten()
    }
}

/// Parses an inbound frame. Only `command` frames of the current version are
/// accepted.
pub fn parse_inbound(text: &str) -> Result<Command, WireError> {
    let frame: Frame = serde_json::from_str(text).map_err(|e| WireError::Malformed(e.to_string()))?;
    if frame.v != WIRE_VERSION {
        return Err(WireError::Version(frame.v));
    }
    if frame.kind != "command" {
        return Err(WireError::UnknownKind(frame.kind));
    }
    serde_json::from_value(frame.body).map_err(|e| WireError::Malformed(e.to_string()))
}
