#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::Arc;

use cola_core::actions::ActionRegistry;
use cola_core::agents::Agents;
use cola_core::clock::{Clock, LogicalClock};
use cola_core::env::{load_scenario, ScenarioScript, SimulatedDesktop};
use cola_core::gateway::{Playbook, ScriptedBackend};
use cola_core::memory::{MemoryBank, StubEmbedder};
use cola_core::orchestrator::{InteractionMode, Session, DEFAULT_BUDGET};

pub const CASE_TASK: &str =
    "Using the browser, find the year in which the birthplace of Example Novelist was incorporated as a borough.";
pub const CASE_ANSWER: &str = "1926";

/// Resolves through `../core` so sibling crates can include this module.
pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures").join(name)
}

pub fn golden_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/tests/goldens")
}

pub fn case_scenario() -> Arc<ScenarioScript> {
    Arc::new(load_scenario(&fixture("gaia-case-1.scenario.json")).expect("fixture scenario"))
}

pub fn case_playbook() -> Playbook {
    Playbook::load(&fixture("gaia-case-1.playbook.json")).expect("fixture playbook")
}

/// Everything one scripted run needs, with a fresh memory bank.
pub struct Rig {
    pub backend: Arc<ScriptedBackend>,
    pub agents: Arc<Agents>,
    pub clock: Arc<dyn Clock>,
    pub scenario: Arc<ScenarioScript>,
}

impl Rig {
    pub fn new(playbook: Playbook, scenario: Arc<ScenarioScript>) -> Self {
        let clock: Arc<dyn Clock> = Arc::new(LogicalClock::default());
        let backend = Arc::new(ScriptedBackend::new(playbook));
        let memory = Arc::new(MemoryBank::in_memory(Arc::new(StubEmbedder), clock.clone()));
        let agents = Arc::new(Agents::new(backend.clone(), memory, Arc::new(ActionRegistry::with_builtins())));
        Self { backend, agents, clock, scenario }
    }

    pub fn case() -> Self {
        Self::new(case_playbook(), case_scenario())
    }

    pub fn session(&self, mode: InteractionMode, budget: u32) -> Session {
        Session::start(
            "case",
            CASE_TASK,
            mode,
            budget,
            Box::new(SimulatedDesktop::new(self.scenario.clone())),
            self.agents.clone(),
            self.clock.clone(),
        )
        .expect("session starts")
    }

    pub fn automatic(&self) -> Session {
        self.session(InteractionMode::Automatic, DEFAULT_BUDGET)
    }
}

/// Serialized event log, one JSON line per record.
pub fn log_bytes(session: &Session) -> Vec<u8> {
    let mut out = Vec::new();
    for r in session.log() {
        serde_json::to_writer(&mut out, r).unwrap();
        out.push(b'\n');
    }
    out
}

pub mod script {
    use cola_core::env::{parse_scenario, ScenarioScript};
    use cola_core::gateway::Playbook;
    use cola_core::model::Role;
    use serde_json::{json, Value};
    use std::sync::Arc;

    pub fn notepad() -> Arc<ScenarioScript> {
        Arc::new(parse_scenario(r#"{"apps": [{"name": "Notepad", "open": true, "foreground": true}], "python": {"arithmetic": true}}"#).unwrap())
    }

    pub fn envelope(branch: &str) -> Value {
        let problem = if matches!(branch, "RemakeSubtasks" | "TaskMismatch" | "Interrupt") { "something is off" } else { "" };
        json!({"branch": branch, "problem": problem, "message": "", "summary": format!("{branch} turn")})
    }

    fn with(mut base: Value, extra: Value) -> Value {
        base.as_object_mut().unwrap().extend(extra.as_object().unwrap().clone());
        base
    }

    pub fn plan(branch: &str, subtasks: &[&str]) -> Value {
        with(envelope(branch), json!({"sub_tasks": subtasks, "question": ""}))
    }

    pub fn schedule(branch: &str, split: &[(Role, &[&str])]) -> Value {
        let dist: Vec<Value> =
            split.iter().map(|(r, t)| json!({"role": r.display_name(), "role_tasks": t})).collect();
        with(envelope(branch), json!({"distribution": dist}))
    }

    pub fn decide(branch: &str, operation: Value) -> Value {
        with(
            envelope(branch),
            json!({"thought_process": ["think"], "local_plan": ["act"], "intention": "act",
                   "operation": operation, "observation": "", "information": "", "analyze": "", "answer": ""}),
        )
    }

    pub fn review(branch: &str, verdict: &str) -> Value {
        with(envelope(branch), json!({"analyze": "looked", "judgement": format!("Checked. {verdict}")}))
    }

    pub fn answer(text: &str) -> Value {
        with(envelope("Continue"), json!({"answer": text}))
    }

    /// A pool operation that is in-domain for `role` and needs no control.
    pub fn op_for(role: Role) -> Value {
        match role {
            Role::Programmer => json!({"action": "run_python_code", "args": {"code": "print(1)"}}),
            Role::ApplicationManager => json!({"action": "open_application", "args": {"name": "Notepad"}}),
            _ => json!({"action": "hotkey", "args": {"keys": ["enter"]}}),
        }
    }

    pub fn playbook(entries: &[(Role, Value)]) -> Playbook {
        let mut pb = Playbook::default();
        for (role, v) in entries {
            pb.push(*role, v.to_string());
        }
        pb
    }
}
