use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{AppEntry, Control, EnvironmentSnapshot};

pub const DEFAULT_APP_STATE: &str = "default";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("scenario error at line {line}: {detail}")]
pub struct ScenarioError {
    pub line: usize,
    pub detail: String,
}

impl ScenarioError {
    fn new(line: usize, detail: impl Into<String>) -> Self {
        Self { line, detail: detail.into() }
    }
}

fn default_state() -> String {
    DEFAULT_APP_STATE.to_string()
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct AppSpec {
    name: String,
    #[serde(default)]
    open: bool,
    #[serde(default)]
    foreground: bool,
    #[serde(default = "default_state")]
    state: String,
    #[serde(default)]
    controls: Vec<Control>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct PythonSpec {
    #[serde(default)]
    outputs: BTreeMap<String, String>,
    #[serde(default)]
    arithmetic: bool,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    #[serde(default)]
    format_version: Option<u32>,
    #[serde(default)]
    name: String,
    apps: Vec<AppSpec>,
    #[serde(default)]
    files: BTreeMap<String, String>,
    #[serde(default)]
    python: PythonSpec,
    #[serde(default)]
    transitions: Vec<Transition>,
}

/// Matches the foreground app (and optionally its state) plus an invocation
/// whose arguments include every `args_match` entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransitionPattern {
    #[serde(default)]
    pub app: Option<String>,
    #[serde(default)]
    pub state: Option<String>,
    pub action: String,
    #[serde(default)]
    pub args_match: BTreeMap<String, Value>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransitionEffect {
    /// Brings this app to the foreground, opening it if needed.
    #[serde(default)]
    pub foreground: Option<String>,
    #[serde(default)]
    pub app_state: Option<String>,
    #[serde(default)]
    pub result: Option<String>,
    #[serde(default)]
    pub controls: Option<Vec<Control>>,
    #[serde(default)]
    pub files: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub when: TransitionPattern,
    #[serde(default)]
    pub then: TransitionEffect,
}

/// A deterministic test world: initial snapshot plus transition rules.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioScript {
    pub name: String,
    pub format_version: u32,
    pub initial: EnvironmentSnapshot,
    /// Window controls shown when an app comes to the foreground without a
    /// rule supplying its own.
    pub app_controls: BTreeMap<String, Vec<Control>>,
    pub python_outputs: BTreeMap<String, String>,
    pub arithmetic: bool,
    pub transitions: Vec<Transition>,
}

impl ScenarioScript {
    pub fn app_names(&self) -> Vec<&str> {
        self.initial.apps.iter().map(|a| a.name.as_str()).collect()
    }

    /// Controls for `app` when it becomes foreground.
    pub fn window_controls(&self, app: &str) -> Vec<Control> {
        match self.app_controls.get(app) {
            Some(c) if !c.is_empty() => c.clone(),
            _ => vec![Control::new(0, "Window", app)],
        }
    }
}

/// 1-based line of the `nth` (0-based) occurrence of `"when"` in `text`.
fn line_of_when(text: &str, nth: usize) -> usize {
    text.match_indices("\"when\"")
        .nth(nth)
        .map(|(pos, _)| text[..pos].matches('\n').count() + 1)
        .unwrap_or(0)
}

fn check_labels(controls: &[Control]) -> Result<(), String> {
    let mut seen = HashSet::new();
    for c in controls {
        if !seen.insert(c.label) {
            return Err(format!("control label {} is not unique", c.label));
        }
    }
    Ok(())
}

pub fn parse_scenario(text: &str) -> Result<ScenarioScript, ScenarioError> {
    let file: ScenarioFile = serde_json::from_str(text).map_err(|e| ScenarioError::new(e.line(), e.to_string()))?;

    let mut names = BTreeSet::new();
    let mut foreground = None;
    for app in &file.apps {
        if !names.insert(app.name.clone()) {
            return Err(ScenarioError::new(0, format!("application `{}` declared twice", app.name)));
        }
        if app.foreground {
            if foreground.replace(app.name.clone()).is_some() {
                return Err(ScenarioError::new(0, "more than one foreground application"));
            }
            if !app.open {
                return Err(ScenarioError::new(0, format!("foreground application `{}` is not open", app.name)));
            }
        }
        check_labels(&app.controls).map_err(|d| ScenarioError::new(0, format!("{}: {d}", app.name)))?;
    }

    let mut keys = HashSet::new();
    for (i, t) in file.transitions.iter().enumerate() {
        let key = (
            t.when.app.clone(),
            t.when.state.clone(),
            t.when.action.clone(),
            serde_json::to_string(&t.when.args_match).expect("json values serialize"),
        );
        if !keys.insert(key) {
            return Err(ScenarioError::new(
                line_of_when(text, i),
                format!("duplicate transition for action `{}`", t.when.action),
            ));
        }
        if let Some(controls) = &t.then.controls {
            check_labels(controls).map_err(|d| ScenarioError::new(line_of_when(text, i), d))?;
        }
        if let Some(target) = &t.then.foreground {
            if !names.contains(target) {
                return Err(ScenarioError::new(line_of_when(text, i), format!("unknown application `{target}`")));
            }
        }
    }

    let app_controls: BTreeMap<String, Vec<Control>> =
        file.apps.iter().map(|a| (a.name.clone(), a.controls.clone())).collect();
    let apps = file
        .apps
        .iter()
        .map(|a| AppEntry { name: a.name.clone(), open: a.open, foreground: a.foreground, state: a.state.clone() })
        .collect();
    let mut script = ScenarioScript {
        name: file.name,
        format_version: file.format_version.unwrap_or(super::FORMAT_VERSION),
        initial: EnvironmentSnapshot { step: 0, apps, controls: Vec::new(), files: file.files, last_result: None },
        app_controls,
        python_outputs: file.python.outputs,
        arithmetic: file.python.arithmetic,
        transitions: file.transitions,
    };
    if let Some(fg) = foreground {
        script.initial.controls = script.window_controls(&fg);
    }
    Ok(script)
}

pub fn load_scenario(path: &Path) -> Result<ScenarioScript, ScenarioError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ScenarioError::new(0, format!("cannot read {}: {e}", path.display())))?;
    parse_scenario(&text)
}
