use std::collections::{BTreeSet, HashMap};
use std::path::Path;
use std::sync::Mutex;

use serde::{Deserialize, Deserializer, Serialize};
use serde_json::Value;

use super::{ChatBackend, ChatRequest, GatewayError};
use crate::model::Role;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlaybookMatch {
    pub role: Role,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step: Option<u64>,
    /// Substring of the last user message.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub contains: Option<String>,
}

fn response_text<'de, D: Deserializer<'de>>(d: D) -> Result<String, D::Error> {
    Ok(match Value::deserialize(d)? {
        Value::String(s) => s,
        other => other.to_string(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlaybookEntry {
    #[serde(rename = "match")]
    pub matcher: PlaybookMatch,
    /// Verbatim reply; JSON objects in the file are stored as their text.
    #[serde(deserialize_with = "response_text")]
    pub response: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Playbook {
    pub entries: Vec<PlaybookEntry>,
}

impl Playbook {
    pub fn parse(text: &str) -> Result<Self, String> {
        serde_json::from_str(text).map_err(|e| format!("line {}: {e}", e.line()))
    }

    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
        Self::parse(&text)
    }

    pub fn push(&mut self, role: Role, response: impl Into<String>) -> &mut Self {
        self.entries.push(PlaybookEntry {
            matcher: PlaybookMatch { role, step: None, contains: None },
            response: response.into(),
        });
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CapturedCall {
    pub session: String,
    pub role: Option<Role>,
    pub step: u64,
    pub request: ChatRequest,
    /// Index of the entry that answered, if any.
    pub entry: Option<usize>,
}

/// Replays a playbook. Each entry answers at most once per session and the
/// first unconsumed matching entry wins.
#[derive(Debug, Default)]
pub struct ScriptedBackend {
    playbook: Playbook,
    consumed: Mutex<HashMap<String, BTreeSet<usize>>>,
    calls: Mutex<Vec<CapturedCall>>,
}

impl ScriptedBackend {
    pub fn new(playbook: Playbook) -> Self {
        Self { playbook, ..Self::default() }
    }

    pub fn playbook(&self) -> &Playbook {
        &self.playbook
    }

    pub fn calls(&self) -> Vec<CapturedCall> {
        self.calls.lock().expect("call log poisoned").clone()
    }

    pub fn call_count(&self) -> usize {
        self.calls.lock().expect("call log poisoned").len()
    }

    fn find(&self, request: &ChatRequest, used: &BTreeSet<usize>) -> Option<usize> {
        let role = request.meta.role?;
        let last_user = request.last_user_message().unwrap_or("");
        self.playbook.entries.iter().enumerate().find_map(|(i, e)| {
            let m = &e.matcher;
            let hit = !used.contains(&i)
                && m.role == role
                && m.step.is_none_or(|s| s == request.meta.step)
                && m.contains.as_deref().is_none_or(|c| last_user.contains(c));
            hit.then_some(i)
        })
    }
}

impl ChatBackend for ScriptedBackend {
    fn complete(&self, request: &ChatRequest) -> Result<String, GatewayError> {
        request.check()?;
        let mut consumed = self.consumed.lock().expect("playbook state poisoned");
        let used = consumed.entry(request.meta.session.clone()).or_default();
        let hit = self.find(request, used);
        if let Some(i) = hit {
            used.insert(i);
        }
        self.calls.lock().expect("call log poisoned").push(CapturedCall {
            session: request.meta.session.clone(),
            role: request.meta.role,
            step: request.meta.step,
            request: request.clone(),
            entry: hit,
        });
        match hit {
            Some(i) => Ok(self.playbook.entries[i].response.clone()),
            None => Err(GatewayError::PlaybookExhausted {
                role: request.meta.role.map_or_else(|| "unknown".into(), |r| r.id().to_string()),
                step: request.meta.step,
            }),
        }
    }

    fn export_state(&self, session: &str) -> Option<Value> {
        let consumed = self.consumed.lock().expect("playbook state poisoned");
        let used: Vec<usize> = consumed.get(session).map(|s| s.iter().copied().collect()).unwrap_or_default();
        Some(Value::from(used))
    }

    fn import_state(&self, session: &str, state: Option<&Value>) {
        let used: BTreeSet<usize> = state
            .and_then(Value::as_array)
            .map(|items| items.iter().filter_map(Value::as_u64).map(|i| i as usize).collect())
            .unwrap_or_default();
        self.consumed.lock().expect("playbook state poisoned").insert(session.to_string(), used);
    }
}
