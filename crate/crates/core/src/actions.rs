//! Action registry with per-role domains.
//!
//! Every action carries a domain: the set of roles allowed to invoke it. The
//! registry is filled at startup (built-ins first, then an optional user
//! manifest) and is read-only afterwards.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::model::{ActionInvocation, Role};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParamKind {
    Integer,
    Number,
    String,
    Boolean,
    /// List of strings.
    List,
    Enum(Vec<String>),
}

impl ParamKind {
    fn accepts(&self, value: &Value) -> bool {
        match self {
            ParamKind::Integer => value.is_i64() || value.is_u64(),
            ParamKind::Number => value.is_number(),
            ParamKind::String => value.is_string(),
            ParamKind::Boolean => value.is_boolean(),
            ParamKind::List => value.as_array().is_some_and(|items| items.iter().all(Value::is_string)),
            ParamKind::Enum(choices) => value.as_str().is_some_and(|s| choices.iter().any(|c| c == s)),
        }
    }
}

impl fmt::Display for ParamKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamKind::Integer => f.write_str("integer"),
            ParamKind::Number => f.write_str("number"),
            ParamKind::String => f.write_str("string"),
            ParamKind::Boolean => f.write_str("boolean"),
            ParamKind::List => f.write_str("list of strings"),
            ParamKind::Enum(choices) => {
                let quoted: Vec<String> = choices.iter().map(|c| format!("{c:?}")).collect();
                write!(f, "one of {}", quoted.join(", "))
            }
        }
    }
}

fn default_required() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamSpec {
    pub name: String,
    #[serde(rename = "type")]
    pub kind: ParamKind,
    pub description: String,
    #[serde(default = "default_required")]
    pub required: bool,
}

impl ParamSpec {
    fn new(name: &str, kind: ParamKind, description: &str) -> Self {
        Self { name: name.into(), kind, description: description.into(), required: true }
    }

    fn optional(mut self) -> Self {
        self.required = false;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionDescriptor {
    pub name: String,
    pub description: String,
    pub params: Vec<ParamSpec>,
    pub domain: BTreeSet<Role>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "param")]
pub enum ArgProblem {
    Missing(String),
    Unexpected(String),
    WrongType(String),
}

impl fmt::Display for ArgProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ArgProblem::Missing(p) => write!(f, "missing argument `{p}`"),
            ArgProblem::Unexpected(p) => write!(f, "unexpected argument `{p}`"),
            ArgProblem::WrongType(p) => write!(f, "argument `{p}` has the wrong type"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AuthError {
    #[error("unknown action `{0}`")]
    UnknownAction(String),
    #[error("role {} may not use action `{action}`", .role.id())]
    DomainViolation { role: Role, action: String },
    #[error("bad arguments for `{action}`: {}", .problems.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    BadArgs { action: String, problems: Vec<ArgProblem> },
}

#[derive(Debug, thiserror::Error)]
pub enum RegistryError {
    #[error("action `{0}` is already registered")]
    DuplicateAction(String),
    #[error("action `{0}` has an empty domain")]
    EmptyDomain(String),
    #[error("cannot read action manifest: {0}")]
    Manifest(String),
}

#[derive(Debug, Clone, Default)]
pub struct ActionRegistry {
    actions: Vec<ActionDescriptor>,
    index: HashMap<String, usize>,
}

impl ActionRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registry holding the eight built-in actions.
    pub fn with_builtins() -> Self {
        let mut registry = Self::new();
        for action in builtin_actions() {
            registry.register(action).expect("built-in actions are unique");
        }
        registry
    }

    pub fn register(&mut self, descriptor: ActionDescriptor) -> Result<(), RegistryError> {
        if self.index.contains_key(&descriptor.name) {
            return Err(RegistryError::DuplicateAction(descriptor.name));
        }
        if descriptor.domain.is_empty() {
            return Err(RegistryError::EmptyDomain(descriptor.name));
        }
        self.index.insert(descriptor.name.clone(), self.actions.len());
        self.actions.push(descriptor);
        Ok(())
    }

    /// Reads a JSON list of descriptors and registers them after whatever is
    /// already present.
    pub fn load_manifest(&mut self, path: &Path) -> Result<usize, RegistryError> {
        let text = std::fs::read_to_string(path).map_err(|e| RegistryError::Manifest(format!("{}: {e}", path.display())))?;
        self.load_manifest_str(&text)
    }

    pub fn load_manifest_str(&mut self, text: &str) -> Result<usize, RegistryError> {
        let descriptors: Vec<ActionDescriptor> =
            serde_json::from_str(text).map_err(|e| RegistryError::Manifest(e.to_string()))?;
        let count = descriptors.len();
        for d in descriptors {
            self.register(d)?;
        }
        Ok(count)
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn get(&self, name: &str) -> Option<&ActionDescriptor> {
        self.index.get(name).map(|&i| &self.actions[i])
    }

    pub fn all(&self) -> &[ActionDescriptor] {
        &self.actions
    }

    /// Descriptors whose domain contains `role`, in registration order.
    pub fn actions_for_role(&self, role: Role) -> Vec<&ActionDescriptor> {
        self.actions.iter().filter(|a| a.domain.contains(&role)).collect()
    }

    pub fn authorize(&self, role: Role, invocation: &ActionInvocation) -> Result<(), AuthError> {
        let descriptor = self
            .get(&invocation.action)
            .ok_or_else(|| AuthError::UnknownAction(invocation.action.clone()))?;
        if !descriptor.domain.contains(&role) {
            return Err(AuthError::DomainViolation { role, action: invocation.action.clone() });
        }
        let mut problems = Vec::new();
        for param in &descriptor.params {
            match invocation.args.get(&param.name) {
                None if param.required => problems.push(ArgProblem::Missing(param.name.clone())),
                None => {}
                Some(value) if !param.kind.accepts(value) => problems.push(ArgProblem::WrongType(param.name.clone())),
                Some(_) => {}
            }
        }
        for name in invocation.args.keys() {
            if !descriptor.params.iter().any(|p| &p.name == name) {
                problems.push(ArgProblem::Unexpected(name.clone()));
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(AuthError::BadArgs { action: invocation.action.clone(), problems })
        }
    }

    /// Text block describing every action in `role`'s domain with its
    /// parameters. Deterministic for a given registry.
    pub fn render_action_prompt(&self, role: Role) -> String {
        let mut out = format!("Actions available to {}:\n", role.display_name());
        for action in self.actions_for_role(role) {
            out.push_str(&format!("- {}: {}\n", action.name, action.description));
            if action.params.is_empty() {
                out.push_str("    (no parameters)\n");
            }
            for p in &action.params {
                let req = if p.required { "required" } else { "optional" };
                out.push_str(&format!("    {} ({}, {}): {}\n", p.name, p.kind, req, p.description));
            }
        }
        out
    }

    /// JSON object of every action name to its description, without parameters.
    pub fn render_all_actions_brief(&self) -> String {
        let mut out = String::from("{\n");
        for (i, action) in self.actions.iter().enumerate() {
            let comma = if i + 1 == self.actions.len() { "" } else { "," };
            out.push_str(&format!(
                "  {}: {}{}\n",
                Value::String(action.name.clone()),
                Value::String(action.description.clone()),
                comma
            ));
        }
        out.push('}');
        out
    }
}

fn domain(roles: &[Role]) -> BTreeSet<Role> {
    roles.iter().copied().collect()
}

fn control_label(description: &str) -> ParamSpec {
    ParamSpec::new("control_label", ParamKind::Integer, description)
}

fn choices(items: &[&str]) -> ParamKind {
    ParamKind::Enum(items.iter().map(|s| s.to_string()).collect())
}

/// The eight built-in actions and their domains.
pub fn builtin_actions() -> Vec<ActionDescriptor> {
    use Role::{ApplicationManager as AM, FileManager as FM, Programmer as PG, Searcher as SR};
    vec![
        ActionDescriptor {
            name: "click_input".into(),
            description: "Click the control with the given button and double-click if needed.".into(),
            params: vec![
                control_label("The label of the control to click."),
                ParamSpec::new("button", choices(&["left", "right"]), "The mouse button to click with."),
                ParamSpec::new("double", ParamKind::Boolean, "Whether to double-click."),
            ],
            domain: domain(&[SR, FM]),
        },
        ActionDescriptor {
            name: "keyboard_input".into(),
            description: "Use to simulate the keyboard input.".into(),
            params: vec![
                control_label("The label of the control to type into; omit to type into the focused control.")
                    .optional(),
                ParamSpec::new("text", ParamKind::String, "The text to type."),
            ],
            domain: domain(&[SR, FM]),
        },
        ActionDescriptor {
            name: "hotkey".into(),
            description: "Use this API to simulate the keyboard shortcut keys or press a single key. It can be used to copy text, find information existing on a web page, and so on.".into(),
            params: vec![ParamSpec::new(
                "keys",
                ParamKind::List,
                "The keys pressed together, for example [\"ctrl\", \"c\"] or [\"enter\"].",
            )],
            domain: domain(&[SR, FM, AM]),
        },
        ActionDescriptor {
            name: "scroll".into(),
            description: "Use to scroll the control item. It typical apply to a ScrollBar type of control item when user request is to scroll the control item, or the targeted control item is not visible nor available in the control item list, but you know the control item is in the application window and you need to scroll to find it.".into(),
            params: vec![
                control_label("The label of the control to scroll."),
                ParamSpec::new("direction", choices(&["up", "down"]), "The scroll direction."),
                ParamSpec::new("amount", ParamKind::Integer, "How many notches to scroll."),
            ],
            domain: domain(&[SR, FM]),
        },
        ActionDescriptor {
            name: "wait_for_loading".into(),
            description: "Waiting for functions to load.".into(),
            params: vec![ParamSpec::new("seconds", ParamKind::Number, "How long to wait, in seconds.")],
            domain: domain(&[SR, FM, AM]),
        },
        ActionDescriptor {
            name: "open_application".into(),
            description: "Open the application with the given name.".into(),
            params: vec![ParamSpec::new("name", ParamKind::String, "The application name.")],
            domain: domain(&[AM]),
        },
        ActionDescriptor {
            name: "run_python_code".into(),
            description: "Run the given Python code.".into(),
            params: vec![ParamSpec::new("code", ParamKind::String, "The Python source to run.")],
            domain: domain(&[PG]),
        },
        ActionDescriptor {
            name: "read_file".into(),
            description: "Read the contents of file.".into(),
            params: vec![ParamSpec::new("path", ParamKind::String, "The path of the file to read.")],
            domain: domain(&[FM]),
        },
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn builtins_register_eight() {
        assert_eq!(ActionRegistry::with_builtins().len(), 8);
    }

    #[test]
    fn duplicate_rejected() {
        let mut reg = ActionRegistry::with_builtins();
        let dup = builtin_actions().into_iter().next().unwrap();
        assert!(matches!(reg.register(dup), Err(RegistryError::DuplicateAction(n)) if n == "click_input"));
    }

    #[test]
    fn custom_action_listed_only_in_domain() {
        let mut reg = ActionRegistry::with_builtins();
        reg.register(ActionDescriptor {
            name: "bookmark_page".into(),
            description: "Bookmark the current page.".into(),
            params: vec![],
            domain: domain(&[Role::Searcher]),
        })
        .unwrap();
        for role in Role::ALL {
            let listed = reg.actions_for_role(role).iter().any(|a| a.name == "bookmark_page");
            assert_eq!(listed, role == Role::Searcher, "{role}");
        }
    }

    #[test]
    fn role_listings() {
        let reg = ActionRegistry::with_builtins();
        let names = |r| reg.actions_for_role(r).iter().map(|a| a.name.clone()).collect::<Vec<_>>();
        assert_eq!(names(Role::Programmer), vec!["run_python_code"]);
        assert_eq!(names(Role::ApplicationManager), vec!["hotkey", "wait_for_loading", "open_application"]);
        assert!(names(Role::Planner).is_empty());
    }

    #[test]
    fn authorize_cases() {
        let reg = ActionRegistry::with_builtins();
        let click = ActionInvocation::new("click_input")
            .arg("control_label", 3)
            .arg("button", "left")
            .arg("double", false);
        assert_eq!(reg.authorize(Role::Searcher, &click), Ok(()));

        let open = ActionInvocation::new("open_application").arg("name", "Microsoft Edge");
        assert!(matches!(reg.authorize(Role::Searcher, &open), Err(AuthError::DomainViolation { .. })));

        let code = ActionInvocation::new("run_python_code").arg("code", "1+1").arg("extra_flag", true);
        assert_eq!(
            reg.authorize(Role::Programmer, &code),
            Err(AuthError::BadArgs {
                action: "run_python_code".into(),
                problems: vec![ArgProblem::Unexpected("extra_flag".into())]
            })
        );

        let ghost = ActionInvocation::new("teleport");
        assert_eq!(reg.authorize(Role::Searcher, &ghost), Err(AuthError::UnknownAction("teleport".into())));
    }

    #[test]
    fn optional_and_typed_args() {
        let reg = ActionRegistry::with_builtins();
        let typed = ActionInvocation::new("keyboard_input").arg("text", "hello");
        assert_eq!(reg.authorize(Role::FileManager, &typed), Ok(()));
        let bad = ActionInvocation::new("click_input")
            .arg("control_label", "three")
            .arg("button", "middle")
            .arg("double", false);
        let err = reg.authorize(Role::Searcher, &bad).unwrap_err();
        assert!(matches!(err, AuthError::BadArgs { ref problems, .. } if problems.len() == 2));
        let keys = ActionInvocation::new("hotkey").arg("keys", json!(["ctrl", "c"]));
        assert_eq!(reg.authorize(Role::ApplicationManager, &keys), Ok(()));
    }

    #[test]
    fn programmer_prompt_is_scoped() {
        let reg = ActionRegistry::with_builtins();
        let text = reg.render_action_prompt(Role::Programmer);
        assert!(text.contains("Run the given Python code."));
        for other in ["click_input", "keyboard_input", "hotkey", "scroll", "wait_for_loading", "open_application", "read_file"] {
            assert!(!text.contains(other), "{other} leaked into the programmer prompt");
        }
    }

    #[test]
    fn empty_domain_renders_header_only() {
        let reg = ActionRegistry::with_builtins();
        assert_eq!(reg.render_action_prompt(Role::Planner), "Actions available to Planner:\n");
    }

    #[test]
    fn manifest_merges_after_builtins() {
        let mut reg = ActionRegistry::with_builtins();
        let manifest = r#"[{"name": "bookmark_page", "description": "Bookmark.", "params": [], "domain": ["Searcher"]},
                          {"name": "zip_folder", "description": "Zip.", "params": [{"name": "path", "type": "string", "description": "Folder."}], "domain": ["file_manager"]}]"#;
        assert_eq!(reg.load_manifest_str(manifest).unwrap(), 2);
        assert_eq!(reg.all()[8].name, "bookmark_page");
        let dup = r#"[{"name": "hotkey", "description": "x", "params": [], "domain": ["Searcher"]}]"#;
        assert!(matches!(reg.load_manifest_str(dup), Err(RegistryError::DuplicateAction(_))));
    }
}
