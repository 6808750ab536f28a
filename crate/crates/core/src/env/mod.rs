//! Environment boundary: perception bundles, action application and a
//! deterministic simulated desktop driven by scenario files.

mod arith;
mod diff;
mod perceive;
mod scenario;
mod simulate;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::model::ActionInvocation;

pub use arith::evaluate_python_expression;
pub use diff::{diff, NO_CHANGE};
pub use perceive::{perceive, PerceptionBundle, DESKTOP_PLACEHOLDER};
pub use scenario::{load_scenario, parse_scenario, ScenarioError, ScenarioScript, Transition, TransitionEffect, TransitionPattern};
pub use simulate::{apply, SimulatedDesktop};

/// Version of the text rendering produced by [`perceive`].
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Control {
    pub label: i64,
    pub kind: String,
    pub title: String,
    #[serde(default)]
    pub rect: [i64; 4],
    #[serde(default = "enabled_default")]
    pub enabled: bool,
}

fn enabled_default() -> bool {
    true
}

impl Control {
    pub fn new(label: i64, kind: &str, title: &str) -> Self {
        Self { label, kind: kind.into(), title: title.into(), rect: [0, 0, 0, 0], enabled: true }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AppEntry {
    pub name: String,
    pub open: bool,
    pub foreground: bool,
    /// Scenario-defined state tag used to match transitions.
    pub state: String,
}

/// The screen state at one step.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnvironmentSnapshot {
    pub step: u64,
    pub apps: Vec<AppEntry>,
    /// Controls of the foreground window; empty iff nothing is foreground.
    pub controls: Vec<Control>,
    pub files: BTreeMap<String, String>,
    pub last_result: Option<String>,
}

impl EnvironmentSnapshot {
    pub fn foreground(&self) -> Option<&AppEntry> {
        self.apps.iter().find(|a| a.foreground)
    }

    pub fn app(&self, name: &str) -> Option<&AppEntry> {
        self.apps.iter().find(|a| a.name == name)
    }

    pub fn control(&self, label: i64) -> Option<&Control> {
        self.controls.iter().find(|c| c.label == label)
    }

    /// Hex SHA-256 of the canonical JSON encoding.
    pub fn digest(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("snapshot serializes");
        hex::encode(Sha256::digest(bytes))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, thiserror::Error)]
#[serde(tag = "kind", content = "detail")]
pub enum EnvError {
    #[error("no control labelled {0} in the foreground window")]
    TargetNotFound(i64),
    #[error("application `{0}` not found")]
    AppNotFound(String),
    #[error("file `{0}` not found")]
    FileNotFound(String),
    #[error("sandbox error: {0}")]
    SandboxError(String),
    #[error("the scenario defines no transition for `{0}`")]
    NoTransition(String),
    #[error("operation not supported by this environment: {0}")]
    Unsupported(String),
}

/// A session's environment. The simulated desktop is the only shipped
/// implementation; a driver for a real OS would sit behind the same trait.
pub trait EnvironmentAdapter: Send {
    fn snapshot(&self) -> EnvironmentSnapshot;

    fn perceive(&self) -> PerceptionBundle {
        perceive(&self.snapshot())
    }

    /// Executes one authorized invocation and returns its result text.
    fn apply(&mut self, invocation: &ActionInvocation) -> Result<Option<String>, EnvError>;

    /// Resets the environment to a checkpointed snapshot.
    fn restore(&mut self, snapshot: &EnvironmentSnapshot) -> Result<(), EnvError>;
}
