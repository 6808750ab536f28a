use std::sync::Arc;

use super::arith::evaluate_python_expression;
use super::{EnvError, EnvironmentAdapter, EnvironmentSnapshot, ScenarioScript, Transition, TransitionEffect};
use crate::model::ActionInvocation;

fn matches(rule: &Transition, env: &EnvironmentSnapshot, invocation: &ActionInvocation) -> bool {
    let when = &rule.when;
    if when.action != invocation.action {
        return false;
    }
    let fg = env.foreground();
    if let Some(app) = &when.app {
        if fg.map(|a| &a.name) != Some(app) {
            return false;
        }
    }
    if let Some(state) = &when.state {
        if fg.map(|a| &a.state) != Some(state) {
            return false;
        }
    }
    when.args_match.iter().all(|(k, v)| invocation.args.get(k) == Some(v))
}

fn bring_to_front(script: &ScenarioScript, env: &mut EnvironmentSnapshot, name: &str) -> Result<(), EnvError> {
    if env.app(name).is_none() {
        return Err(EnvError::AppNotFound(name.to_string()));
    }
    for app in &mut env.apps {
        app.foreground = app.name == name;
        if app.foreground {
            app.open = true;
        }
    }
    env.controls = script.window_controls(name);
    Ok(())
}

fn apply_effect(
    script: &ScenarioScript,
    env: &mut EnvironmentSnapshot,
    effect: &TransitionEffect,
) -> Result<Option<String>, EnvError> {
    if let Some(target) = &effect.foreground {
        bring_to_front(script, env, target)?;
    }
    if let Some(state) = &effect.app_state {
        if let Some(app) = env.apps.iter_mut().find(|a| a.foreground) {
            app.state = state.clone();
        }
    }
    if let Some(controls) = &effect.controls {
        if env.foreground().is_some() {
            env.controls = controls.clone();
        }
    }
    for (path, content) in &effect.files {
        env.files.insert(path.clone(), content.clone());
    }
    Ok(effect.result.clone())
}

fn str_arg<'a>(invocation: &'a ActionInvocation, name: &str) -> &'a str {
    invocation.args.get(name).and_then(|v| v.as_str()).unwrap_or("")
}

fn default_effect(
    script: &ScenarioScript,
    env: &mut EnvironmentSnapshot,
    invocation: &ActionInvocation,
) -> Result<Option<String>, EnvError> {
    match invocation.action.as_str() {
        "open_application" => {
            bring_to_front(script, env, str_arg(invocation, "name"))?;
            Ok(None)
        }
        "read_file" => {
            let path = str_arg(invocation, "path");
            env.files.get(path).cloned().map(Some).ok_or_else(|| EnvError::FileNotFound(path.to_string()))
        }
        "run_python_code" => {
            let code = str_arg(invocation, "code");
            if let Some(out) = script.python_outputs.get(code.trim()) {
                return Ok(Some(out.clone()));
            }
            if script.arithmetic {
                return evaluate_python_expression(code).map(Some).map_err(EnvError::SandboxError);
            }
            Err(EnvError::SandboxError("no recorded output for this code".into()))
        }
        "click_input" | "keyboard_input" | "scroll" | "hotkey" | "wait_for_loading" => Ok(None),
        other => Err(EnvError::NoTransition(other.to_string())),
    }
}

/// Executes `invocation` against `env` under `script`. Pure: on error the
/// input snapshot is untouched, on success the returned one is one step on.
pub fn apply(
    script: &ScenarioScript,
    env: &EnvironmentSnapshot,
    invocation: &ActionInvocation,
) -> Result<(EnvironmentSnapshot, Option<String>), EnvError> {
    if let Some(label) = invocation.args.get("control_label").filter(|v| !v.is_null()) {
        let label = label.as_i64().unwrap_or(-1);
        if env.control(label).is_none() {
            return Err(EnvError::TargetNotFound(label));
        }
    }
    let mut next = env.clone();
    let result = match script.transitions.iter().find(|t| matches(t, env, invocation)) {
        Some(rule) => apply_effect(script, &mut next, &rule.then)?,
        None => default_effect(script, &mut next, invocation)?,
    };
    next.step = env.step + 1;
    next.last_result = result.clone();
    Ok((next, result))
}

/// Scenario-driven desktop used by tests, the CLI and the service.
#[derive(Debug, Clone)]
pub struct SimulatedDesktop {
    script: Arc<ScenarioScript>,
    current: EnvironmentSnapshot,
}

impl SimulatedDesktop {
    pub fn new(script: Arc<ScenarioScript>) -> Self {
        let current = script.initial.clone();
        Self { script, current }
    }

    pub fn script(&self) -> &ScenarioScript {
        &self.script
    }
}

impl EnvironmentAdapter for SimulatedDesktop {
    fn snapshot(&self) -> EnvironmentSnapshot {
        self.current.clone()
    }

    fn apply(&mut self, invocation: &ActionInvocation) -> Result<Option<String>, EnvError> {
        let (next, result) = apply(&self.script, &self.current, invocation)?;
        self.current = next;
        Ok(result)
    }

    fn restore(&mut self, snapshot: &EnvironmentSnapshot) -> Result<(), EnvError> {
        self.current = snapshot.clone();
        Ok(())
    }
}
