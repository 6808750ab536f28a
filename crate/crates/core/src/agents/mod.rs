//! The LLM-backed roles: planner, task scheduler, decision agents, reviewer
//! and final-answer synthesis. Each call assembles a prompt from the role's
//! system template, its memories and the live context, then asks the gateway
//! for a validated response.

mod context;
mod prompts;

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::actions::{ActionRegistry, AuthError};
use crate::gateway::{complete_validated, ChatBackend, ChatMessage, ChatRequest, GatewayError, DEFAULT_MAX_REPAIRS, DEFAULT_MODEL};
use crate::memory::{MemoryBank, ShortTermWindow};
use crate::model::{validate_distribution, ActionInvocation, AgentResponse, BranchType, ResponseSchema, Role, Violation};

pub use context::{DecideInput, ReviewInput};
pub use prompts::{
    builtin_pool, fill, load_configs, placeholders, render_role_capabilities, render_system_prompt, AgentConfig,
    RoleDescriptor,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AgentError {
    #[error("template placeholder `{{{0}}}` has no binding")]
    UnboundPlaceholder(String),
    #[error("cannot load prompt template: {0}")]
    Template(String),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error("memory error: {0}")]
    Memory(String),
    #[error("operation rejected: {0}")]
    Unauthorized(AuthError),
    #[error("role {} is not an agent", .0.id())]
    NotAnAgent(Role),
    #[error("{0} must not be empty")]
    EmptyInput(&'static str),
}

impl From<crate::memory::MemoryError> for AgentError {
    fn from(e: crate::memory::MemoryError) -> Self {
        AgentError::Memory(e.to_string())
    }
}

/// Where a call sits in its session and what that role remembers of it.
#[derive(Debug, Clone, Copy)]
pub struct Turn<'a> {
    pub session: &'a str,
    /// Index of the step record the call belongs to.
    pub step: u64,
    pub short_term: &'a ShortTermWindow,
    pub guidance: Option<&'a str>,
}

/// A validated response plus what it cost.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentOutput {
    pub response: AgentResponse,
    pub calls: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FinalAnswer {
    pub answer: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

pub const NO_INFORMATION_NOTE: &str = "No information was gathered while executing the subtasks; the answer is not backed by observations.";

/// Everything the agents share within one engine.
pub struct Agents {
    backend: Arc<dyn ChatBackend>,
    memory: Arc<MemoryBank>,
    registry: Arc<ActionRegistry>,
    pool: Vec<RoleDescriptor>,
    configs: BTreeMap<Role, AgentConfig>,
    model: String,
    max_repairs: u32,
}

impl Agents {
    pub fn new(backend: Arc<dyn ChatBackend>, memory: Arc<MemoryBank>, registry: Arc<ActionRegistry>) -> Self {
        Self {
            backend,
            memory,
            registry,
            pool: builtin_pool(),
            configs: load_configs(None).expect("built-in templates load"),
            model: DEFAULT_MODEL.to_string(),
            max_repairs: DEFAULT_MAX_REPAIRS,
        }
    }

    pub fn with_configs(mut self, configs: BTreeMap<Role, AgentConfig>) -> Self {
        self.configs = configs;
        self
    }

    pub fn with_pool(mut self, pool: Vec<RoleDescriptor>) -> Self {
        self.pool = pool;
        self
    }

    pub fn with_model(mut self, model: impl Into<String>) -> Self {
        self.model = model.into();
        self
    }

    pub fn with_max_repairs(mut self, max_repairs: u32) -> Self {
        self.max_repairs = max_repairs;
        self
    }

    pub fn backend(&self) -> &Arc<dyn ChatBackend> {
        &self.backend
    }

    pub fn memory(&self) -> &Arc<MemoryBank> {
        &self.memory
    }

    pub fn registry(&self) -> &Arc<ActionRegistry> {
        &self.registry
    }

    pub fn pool(&self) -> &[RoleDescriptor] {
        &self.pool
    }

    pub fn roster(&self) -> Vec<Role> {
        self.pool.iter().map(|d| d.name).collect()
    }

    pub fn config(&self, role: Role) -> Result<&AgentConfig, AgentError> {
        self.configs.get(&role).ok_or(AgentError::NotAnAgent(role))
    }

    pub fn system_prompt(&self, role: Role) -> Result<String, AgentError> {
        render_system_prompt(self.config(role)?, &self.pool, &self.registry)
    }

    /// Full request for `role`: system prompt, long-term records retrieved
    /// with `query`, the short-term window, the live context and guidance.
    pub fn build_request(&self, role: Role, turn: &Turn<'_>, query: &str, live: String) -> Result<ChatRequest, AgentError> {
        let config = self.config(role)?;
        let system = render_system_prompt(config, &self.pool, &self.registry)?;
        let records = self.memory.retrieve(role, query, config.lt_n)?;
        let mut messages = vec![
            ChatMessage::system(system),
            ChatMessage::user(context::long_term_block(config.lt_n, &records)),
            ChatMessage::user(context::short_term_block(config.st_m, turn.short_term.window(config.st_m))),
            ChatMessage::user(live),
        ];
        if let Some(text) = turn.guidance.filter(|g| !g.trim().is_empty()) {
            messages.push(ChatMessage::user(context::guidance_block(text)));
        }
        let mut request = ChatRequest::new(messages).with_meta(turn.session, role, turn.step);
        request.model = self.model.clone();
        Ok(request)
    }

    fn complete(&self, request: &ChatRequest, schema: ResponseSchema) -> Result<AgentOutput, AgentError> {
        let done = complete_validated(self.backend.as_ref(), request, schema, self.max_repairs)?;
        Ok(AgentOutput { response: done.response, calls: done.calls })
    }

    /// Splits the request into coarse subtasks. `feedback` carries a problem
    /// reported downstream when re-planning.
    pub fn plan(&self, turn: &Turn<'_>, request: &str, feedback: Option<&str>) -> Result<AgentOutput, AgentError> {
        if request.trim().is_empty() {
            return Err(AgentError::EmptyInput("request"));
        }
        let live = context::plan_context(request, feedback);
        let req = self.build_request(Role::Planner, turn, request, live)?;
        self.complete(&req, ResponseSchema::Planner)
    }

    /// Assigns subtasks to pool roles. An invalid distribution gets one
    /// repair prompt; if it is still invalid the turn is turned into a
    /// `RemakeSubtasks` response carrying the violations.
    pub fn schedule(
        &self,
        turn: &Turn<'_>,
        request: &str,
        subtasks: &[String],
        feedback: Option<&str>,
    ) -> Result<AgentOutput, AgentError> {
        if subtasks.is_empty() {
            return Err(AgentError::EmptyInput("subtask list"));
        }
        let live = context::schedule_context(request, subtasks, feedback);
        let mut req = self.build_request(Role::TaskScheduler, turn, &subtasks.join("\n"), live)?;
        let roster = self.roster();
        let mut out = self.complete(&req, ResponseSchema::Scheduler)?;
        let mut attempt = 0;
        loop {
            let Some(payload) = out.response.scheduler().filter(|_| out.response.branch == BranchType::Continue) else {
                return Ok(out);
            };
            let Err(violations) = validate_distribution(payload, subtasks, &roster) else {
                return Ok(out);
            };
            if attempt == 1 {
                out.response = escalate_distribution(out.response, &violations);
                return Ok(out);
            }
            attempt += 1;
            req.messages.push(ChatMessage::assistant(out.response.to_json_string()));
            req.messages.push(ChatMessage::user(context::distribution_repair(&violations, &roster)));
            let calls = out.calls;
            out = self.complete(&req, ResponseSchema::Scheduler)?;
            out.calls += calls;
        }
    }

    /// One decision-agent turn. An operation outside the role's domain (or
    /// with bad arguments) gets one repair prompt before failing.
    pub fn decide(&self, role: Role, turn: &Turn<'_>, input: &DecideInput<'_>) -> Result<AgentOutput, AgentError> {
        if !role.is_decision_agent() {
            return Err(AgentError::NotAnAgent(role));
        }
        if input.subtasks.is_empty() {
            return Err(AgentError::EmptyInput("assigned subtask list"));
        }
        let live = context::decide_context(input);
        let query = format!("{}\n{}", input.request, input.subtasks.join("\n"));
        let mut req = self.build_request(role, turn, &query, live)?;
        let schema = ResponseSchema::Decision(role);
        let mut out = self.complete(&req, schema)?;
        let mut repaired = false;
        loop {
            let Some(op) = out.response.decision().and_then(|d| d.operation.as_ref()) else {
                return Ok(out);
            };
            let Err(err) = self.registry.authorize(role, op) else {
                return Ok(out);
            };
            if repaired {
                return Err(AgentError::Unauthorized(err));
            }
            repaired = true;
            req.messages.push(ChatMessage::assistant(out.response.to_json_string()));
            req.messages.push(ChatMessage::user(context::authorization_repair(&err, &self.registry.render_action_prompt(role))));
            let calls = out.calls;
            out = self.complete(&req, schema)?;
            out.calls += calls;
        }
    }

    /// Judges an executed operation from the before/after views.
    pub fn review(&self, turn: &Turn<'_>, input: &ReviewInput<'_>) -> Result<AgentOutput, AgentError> {
        let live = context::review_context(input);
        let req = self.build_request(Role::Reviewer, turn, input.intention, live)?;
        self.complete(&req, ResponseSchema::Reviewer)
    }

    /// Planner-role completion producing the final answer.
    pub fn finalize(
        &self,
        turn: &Turn<'_>,
        request: &str,
        question: &str,
        gathered: &[String],
    ) -> Result<(AgentOutput, FinalAnswer), AgentError> {
        let live = context::finalize_context(request, question, gathered);
        let req = self.build_request(Role::Planner, turn, request, live)?;
        let out = self.complete(&req, ResponseSchema::FinalAnswer)?;
        let mut answer = out.response.answer().map(|a| a.answer.trim().to_string()).unwrap_or_default();
        if answer.is_empty() {
            answer = out.response.summary.trim().to_string();
        }
        let note = (gathered.is_empty() && !question.trim().is_empty()).then(|| NO_INFORMATION_NOTE.to_string());
        Ok((out, FinalAnswer { answer, note }))
    }
}

fn escalate_distribution(mut response: AgentResponse, violations: &[Violation]) -> AgentResponse {
    let listed: Vec<String> = violations.iter().map(ToString::to_string).collect();
    response.branch = BranchType::RemakeSubtasks;
    response.problem = format!("The subtask distribution is invalid: {}", listed.join("; "));
    response
}

/// Convenience used by tests and the orchestrator alike.
pub fn operation_of(response: &AgentResponse) -> Option<&ActionInvocation> {
    response.decision().and_then(|d| d.operation.as_ref())
}
