use std::collections::BTreeMap;
use std::sync::Arc;

use base64::engine::general_purpose::STANDARD as BASE64;
use base64::Engine as _;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{route, CommandError, EngineError, HaltReason, InteractionMode, Phase, Route, SessionStore, StepRecord, StoredSession};
use super::Command;
use crate::agents::{AgentError, Agents, DecideInput, FinalAnswer, ReviewInput, Turn};
use crate::clock::Clock;
use crate::env::{diff, EnvError, EnvironmentAdapter, EnvironmentSnapshot};
use crate::gateway::GatewayError;
use crate::model::{ActionInvocation, AgentResponse, Assignment, BranchType, Role, TaskContext, Verdict};
use crate::memory::ShortTermWindow;

pub const DEFAULT_BUDGET: u32 = 20;

/// The last operation the executor carried out, kept so a reviewer can be
/// asked about it again.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LastAction {
    pub role: Role,
    pub intention: String,
    pub operation: ActionInvocation,
    pub result: Option<String>,
    pub before: EnvironmentSnapshot,
    pub after: EnvironmentSnapshot,
}

/// Everything a checkpoint restores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionState {
    pub id: String,
    pub request: String,
    pub mode: InteractionMode,
    pub phase: Phase,
    /// Phase to return to when a revivable halt is lifted.
    pub resume_phase: Option<Phase>,
    /// Decision steps taken.
    pub step: u32,
    pub budget: u32,
    /// Length of the event log.
    pub records: u64,
    pub context: TaskContext,
    pub subtasks: Vec<String>,
    pub assignments: Vec<Assignment>,
    /// Problem text for the next planner or scheduler turn.
    pub feedback: Option<String>,
    /// Reviewer judgement for the next decision turn.
    pub judgement: Option<String>,
    pub last_action: Option<LastAction>,
    pub review_requested: bool,
    pub short_term: BTreeMap<Role, ShortTermWindow>,
    pub env: EnvironmentSnapshot,
    pub awaiting: bool,
    pub permit: bool,
    pub pending_guidance: Vec<String>,
    pub backend_state: Option<Value>,
}

impl SessionState {
    pub fn encode(&self) -> String {
        BASE64.encode(serde_json::to_vec(self).expect("session state serializes"))
    }

    pub fn decode(blob: &str) -> Result<Self, EngineError> {
        let bytes = BASE64.decode(blob).map_err(|e| EngineError::Serialization(e.to_string()))?;
        serde_json::from_slice(&bytes).map_err(|e| EngineError::Serialization(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchivedBranch {
    /// The rollback target; the records start at `rollback_to + 1`.
    pub rollback_to: u64,
    pub records: Vec<StepRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionStatus {
    pub id: String,
    pub request: String,
    pub mode: InteractionMode,
    pub phase: Phase,
    pub step: u32,
    pub budget: u32,
    pub records: u64,
    pub awaiting: bool,
    pub archived_branches: usize,
    pub memories_committed: bool,
}

/// What a phase step produced before it is sealed into a record.
struct Draft {
    acting_role: Role,
    response: Option<AgentResponse>,
    invocation: Option<ActionInvocation>,
    result: Option<String>,
    execution_error: Option<EnvError>,
    review: Option<AgentResponse>,
    calls: u32,
    /// A failure that parks the session after the record is written.
    deferred: Option<AgentError>,
}

impl Draft {
    fn new(acting_role: Role, response: AgentResponse, calls: u32) -> Self {
        Self {
            acting_role,
            response: Some(response),
            invocation: None,
            result: None,
            execution_error: None,
            review: None,
            calls,
            deferred: None,
        }
    }
}

fn halt_reason(err: &AgentError) -> HaltReason {
    match err {
        AgentError::Gateway(GatewayError::ValidationExhausted { .. }) | AgentError::Unauthorized(_) => {
            HaltReason::Validation
        }
        _ => HaltReason::Error,
    }
}

/// One task run.
pub struct Session {
    state: SessionState,
    log: Vec<StepRecord>,
    archived: Vec<ArchivedBranch>,
    memories_committed: bool,
    env: Box<dyn EnvironmentAdapter>,
    agents: Arc<Agents>,
    clock: Arc<dyn Clock>,
    store: Option<SessionStore>,
}

impl Session {
    /// New session in the planning phase. Passive and Active sessions start
    /// paused.
    pub fn start(
        id: impl Into<String>,
        request: impl Into<String>,
        mode: InteractionMode,
        budget: u32,
        env: Box<dyn EnvironmentAdapter>,
        agents: Arc<Agents>,
        clock: Arc<dyn Clock>,
    ) -> Result<Self, EngineError> {
        let request = request.into();
        if request.trim().is_empty() {
            return Err(EngineError::EmptyRequest);
        }
        let id = id.into();
        let backend_state = agents.backend().export_state(&id);
        let state = SessionState {
            id,
            context: TaskContext::new(request.clone()),
            request,
            mode,
            phase: Phase::Planning,
            resume_phase: None,
            step: 0,
            budget,
            records: 0,
            subtasks: Vec::new(),
            assignments: Vec::new(),
            feedback: None,
            judgement: None,
            last_action: None,
            review_requested: false,
            short_term: BTreeMap::new(),
            env: env.snapshot(),
            awaiting: mode != InteractionMode::Automatic,
            permit: false,
            pending_guidance: Vec::new(),
            backend_state,
        };
        Ok(Self {
            state,
            log: Vec::new(),
            archived: Vec::new(),
            memories_committed: false,
            env,
            agents,
            clock,
            store: None,
        })
    }

    /// Rebuilds a persisted session. `env` is reset to the recovered
    /// snapshot and the backend to the recovered playbook position.
    pub fn recover(
        stored: StoredSession,
        store: SessionStore,
        mut env: Box<dyn EnvironmentAdapter>,
        agents: Arc<Agents>,
        clock: Arc<dyn Clock>,
    ) -> Result<Self, EngineError> {
        let StoredSession { meta, events, archived } = stored;
        let mut state = if meta.state.records == events.len() as u64 {
            meta.state
        } else {
            // Crashed between writing a record and its meta; the record wins.
            let mut s = match events.last() {
                Some(last) => SessionState::decode(&last.state_blob)?,
                None => meta.state,
            };
            s.awaiting = true;
            s.permit = false;
            s
        };
        state.records = events.len() as u64;
        env.restore(&state.env).map_err(|e| EngineError::Persistence(e.to_string()))?;
        agents.backend().import_state(&state.id, state.backend_state.as_ref());
        Ok(Self {
            state,
            log: events,
            archived,
            memories_committed: meta.memories_committed,
            env,
            agents,
            clock,
            store: Some(store),
        })
    }

    /// Writes every change through to `store`.
    pub fn with_store(mut self, store: SessionStore) -> Result<Self, EngineError> {
        store.write_meta(&self.state, self.memories_committed)?;
        self.store = Some(store);
        Ok(self)
    }

    pub fn id(&self) -> &str {
        &self.state.id
    }

    pub fn state(&self) -> &SessionState {
        &self.state
    }

    pub fn phase(&self) -> &Phase {
        &self.state.phase
    }

    pub fn log(&self) -> &[StepRecord] {
        &self.log
    }

    pub fn archived(&self) -> &[ArchivedBranch] {
        &self.archived
    }

    pub fn agents(&self) -> &Arc<Agents> {
        &self.agents
    }

    pub fn memories_committed(&self) -> bool {
        self.memories_committed
    }

    pub fn environment(&self) -> EnvironmentSnapshot {
        self.env.snapshot()
    }

    pub fn status(&self) -> SessionStatus {
        SessionStatus {
            id: self.state.id.clone(),
            request: self.state.request.clone(),
            mode: self.state.mode,
            phase: self.state.phase.clone(),
            step: self.state.step,
            budget: self.state.budget,
            records: self.log.len() as u64,
            awaiting: self.state.awaiting,
            archived_branches: self.archived.len(),
            memories_committed: self.memories_committed,
        }
    }

    /// Digest of the latest record, if any.
    pub fn checkpoint(&self) -> Option<String> {
        self.log.last().map(StepRecord::digest)
    }

    /// Whether `advance` would run a step right now.
    pub fn can_advance(&self) -> bool {
        !self.state.phase.is_terminal()
            && !self.state.awaiting
            && (self.state.mode != InteractionMode::Active || self.state.permit)
    }

    /// Holds a runnable session where it is until a command arrives. Used
    /// for sessions picked up after a restart.
    pub fn park(&mut self) -> Result<(), EngineError> {
        if self.can_advance() {
            self.state.awaiting = true;
            self.state.permit = false;
            self.persist_meta()?;
        }
        Ok(())
    }

    fn command_window(&self) -> bool {
        self.state.awaiting || self.state.mode == InteractionMode::Active
    }

    fn persist_meta(&self) -> Result<(), EngineError> {
        match &self.store {
            Some(store) => store.write_meta(&self.state, self.memories_committed),
            None => Ok(()),
        }
    }

    fn window(&self, role: Role) -> ShortTermWindow {
        self.state.short_term.get(&role).cloned().unwrap_or_else(|| ShortTermWindow::new(role))
    }

    fn remember(&mut self, role: Role, step: u64, response: &AgentResponse) {
        let window = self.state.short_term.entry(role).or_insert_with(|| ShortTermWindow::new(role));
        // Steps are record indices, which only grow within one timeline.
        window.push(step, response.clone()).expect("short-term steps ascend");
    }

    /// Parks (Passive/Active) or halts (Automatic) the session.
    fn stop(&mut self, reason: HaltReason) {
        self.state.awaiting = true;
        self.state.permit = false;
        if self.state.mode == InteractionMode::Automatic {
            self.state.resume_phase = Some(self.state.phase.clone());
            self.state.phase = Phase::Halted { reason };
        }
    }

    fn enter_assignment(&mut self, index: usize) {
        match self.state.assignments.get(index) {
            Some(a) => {
                self.state.phase = Phase::Deciding { role: a.role, assignment: index };
                self.state.context.current_assignment = Some(a.clone());
            }
            None => {
                self.state.phase = Phase::Finalizing;
                self.state.context.current_assignment = None;
            }
        }
        self.state.judgement = None;
    }

    /// Runs exactly one phase step and appends its record.
    pub fn advance(&mut self) -> Result<StepRecord, EngineError> {
        if self.state.phase.is_terminal() {
            return Err(EngineError::NotRunnable(self.state.phase.name()));
        }
        if !self.can_advance() {
            return Err(EngineError::AwaitingCommand);
        }
        if self.state.mode == InteractionMode::Active {
            self.state.permit = false;
        }
        let index = self.log.len() as u64;
        let pending = std::mem::take(&mut self.state.pending_guidance);
        let guidance = (!pending.is_empty()).then(|| pending.join("\n\n"));
        let phase = self.state.phase.clone();
        let env_before = self.env.snapshot();

        let outcome = if self.state.review_requested {
            self.review_again(index, guidance.as_deref())
        } else {
            match phase.clone() {
                Phase::Planning => self.plan_step(index, guidance.as_deref()),
                Phase::Scheduling => self.schedule_step(index, guidance.as_deref()),
                Phase::Deciding { role, assignment } => self.decide_step(role, assignment, index, guidance.as_deref()),
                Phase::Finalizing => self.finalize_step(index, guidance.as_deref()),
                Phase::Halted { .. } | Phase::Done { .. } => unreachable!("terminal phases return early"),
            }
        };

        let draft = match outcome {
            Ok(draft) => draft,
            Err(EngineError::Agent(err)) => {
                self.state.pending_guidance = pending;
                tracing::warn!(session = %self.state.id, error = %err, "agent turn failed");
                self.stop(halt_reason(&err));
                self.persist_meta()?;
                return Err(EngineError::Agent(err));
            }
            Err(err) => {
                self.state.pending_guidance = pending;
                self.persist_meta()?;
                return Err(err);
            }
        };

        if let Some(err) = &draft.deferred {
            self.stop(halt_reason(err));
        }
        self.state.env = self.env.snapshot();
        self.state.records = index + 1;
        self.state.backend_state = self.agents.backend().export_state(&self.state.id);
        let record = StepRecord {
            index,
            phase,
            acting_role: draft.acting_role,
            response: draft.response,
            invocation: draft.invocation,
            result: draft.result,
            execution_error: draft.execution_error,
            review: draft.review,
            env_before_hash: env_before.digest(),
            env_after_hash: self.state.env.digest(),
            state_blob: self.state.encode(),
            guidance,
            calls: draft.calls,
            timestamp: self.clock.timestamp(index),
        };
        self.log.push(record.clone());
        if let Some(store) = &self.store {
            store.append_event(&record)?;
        }
        self.persist_meta()?;
        Ok(record)
    }

    /// Advances until the session stops, parks or needs a command. Returns
    /// the error that stopped it, if any.
    pub fn run_until_pause(&mut self) -> Option<EngineError> {
        while self.can_advance() {
            if let Err(e) = self.advance() {
                return Some(e);
            }
        }
        None
    }

    fn plan_step(&mut self, index: u64, guidance: Option<&str>) -> Result<Draft, EngineError> {
        let agents = self.agents.clone();
        let window = self.window(Role::Planner);
        let turn = Turn { session: &self.state.id, step: index, short_term: &window, guidance };
        let out = agents.plan(&turn, &self.state.request, self.state.feedback.as_deref())?;
        self.state.feedback = None;
        self.remember(Role::Planner, index, &out.response);
        match route(Role::Planner, out.response.branch).expect("validated") {
            Route::Interrupt => self.stop(HaltReason::Interrupt),
            _ => {
                let plan = out.response.planner().expect("planner payload");
                self.state.subtasks = plan.sub_tasks.clone();
                self.state.context.question = plan.question.clone();
                self.state.assignments.clear();
                self.state.phase = Phase::Scheduling;
            }
        }
        Ok(Draft::new(Role::Planner, out.response, out.calls))
    }

    fn schedule_step(&mut self, index: u64, guidance: Option<&str>) -> Result<Draft, EngineError> {
        let agents = self.agents.clone();
        let window = self.window(Role::TaskScheduler);
        let turn = Turn { session: &self.state.id, step: index, short_term: &window, guidance };
        let out = agents.schedule(&turn, &self.state.request, &self.state.subtasks, self.state.feedback.as_deref())?;
        self.state.feedback = None;
        self.remember(Role::TaskScheduler, index, &out.response);
        match route(Role::TaskScheduler, out.response.branch).expect("validated") {
            Route::Interrupt => self.stop(HaltReason::Interrupt),
            Route::Replan => {
                self.state.feedback = Some(out.response.problem.clone());
                self.state.phase = Phase::Planning;
            }
            _ => {
                let payload = out.response.scheduler().expect("scheduler payload");
                self.state.assignments = payload
                    .distribution
                    .iter()
                    .filter(|e| !e.role_tasks.is_empty())
                    .map(|e| Assignment {
                        role: Role::parse_name(&e.role).expect("validated distribution"),
                        tasks: e.role_tasks.clone(),
                    })
                    .collect();
                self.enter_assignment(0);
            }
        }
        Ok(Draft::new(Role::TaskScheduler, out.response, out.calls))
    }

    fn decide_step(&mut self, role: Role, assignment: usize, index: u64, guidance: Option<&str>) -> Result<Draft, EngineError> {
        if self.state.step >= self.state.budget {
            self.state.awaiting = false;
            self.state.resume_phase = None;
            self.state.phase = Phase::Halted { reason: HaltReason::Budget };
            return Err(EngineError::BudgetExhausted { budget: self.state.budget });
        }
        let agents = self.agents.clone();
        let tasks = self.state.assignments.get(assignment).map(|a| a.tasks.clone()).unwrap_or_default();
        let before = self.env.snapshot();
        let perception = self.env.perceive();
        let window = self.window(role);
        let turn = Turn { session: &self.state.id, step: index, short_term: &window, guidance };
        let input = DecideInput {
            request: &self.state.request,
            question: &self.state.context.question,
            subtasks: &tasks,
            perception: &perception,
            last_result: before.last_result.as_deref(),
            judgement: self.state.judgement.as_deref(),
        };
        let out = agents.decide(role, &turn, &input)?;
        self.state.step += 1;
        self.state.judgement = None;
        self.remember(role, index, &out.response);

        let decision = out.response.decision().expect("decision payload").clone();
        if let Some(info) = &decision.information {
            self.state.context.gather(info.clone());
        }
        if let Some(answer) = &decision.answer {
            self.state.context.gather(answer.clone());
        }

        let mut draft = Draft::new(role, out.response.clone(), out.calls);
        let next = route(role, out.response.branch).expect("validated");
        let mut succeeded = true;
        let mut reviewer_interrupt = false;

        if let (Some(op), Route::Stay | Route::NextAssignment) = (&decision.operation, next) {
            draft.invocation = Some(op.clone());
            match self.env.apply(op) {
                Ok(result) => {
                    let after = self.env.snapshot();
                    if let Some(text) = &result {
                        self.state.context.gather(text.clone());
                    }
                    draft.result = result.clone();
                    self.state.last_action = Some(LastAction {
                        role,
                        intention: decision.intention.clone(),
                        operation: op.clone(),
                        result,
                        before,
                        after,
                    });
                    match self.review_last(index, None) {
                        Ok((review, calls)) => {
                            draft.calls += calls;
                            let verdict = review.reviewer().expect("reviewer payload").verdict;
                            succeeded = verdict == Verdict::Success;
                            reviewer_interrupt = review.branch == BranchType::Interrupt;
                            draft.review = Some(review);
                        }
                        Err(EngineError::Agent(err)) => {
                            succeeded = false;
                            draft.deferred = Some(err);
                        }
                        Err(other) => return Err(other),
                    }
                }
                Err(err) => {
                    succeeded = false;
                    self.state.judgement = Some(format!("The operation could not be executed: {err}"));
                    draft.execution_error = Some(err);
                }
            }
        }

        if reviewer_interrupt {
            self.stop(HaltReason::Interrupt);
            return Ok(draft);
        }
        match next {
            Route::Stay => {}
            Route::NextAssignment if succeeded => self.enter_assignment(assignment + 1),
            Route::NextAssignment => {}
            Route::Reschedule => {
                self.state.feedback = Some(out.response.problem.clone());
                self.state.judgement = None;
                self.state.phase = Phase::Scheduling;
            }
            _ => self.stop(HaltReason::Interrupt),
        }
        Ok(draft)
    }

    /// Asks the reviewer about `last_action` and threads the judgement back.
    fn review_last(&mut self, index: u64, guidance: Option<&str>) -> Result<(AgentResponse, u32), EngineError> {
        let agents = self.agents.clone();
        let action = self.state.last_action.clone().expect("an operation was executed");
        let before = crate::env::perceive(&action.before);
        let after = crate::env::perceive(&action.after);
        let changes = diff(&action.before, &action.after);
        let window = self.window(Role::Reviewer);
        let turn = Turn { session: &self.state.id, step: index, short_term: &window, guidance };
        let input = ReviewInput {
            intention: &action.intention,
            operation: &action.operation,
            result: action.result.as_deref(),
            before: &before,
            after: &after,
            diff: &changes,
        };
        let out = agents.review(&turn, &input)?;
        self.remember(Role::Reviewer, index, &out.response);
        let judgement = out.response.reviewer().expect("reviewer payload").judgement.clone();
        self.state.judgement = Some(judgement);
        Ok((out.response, out.calls))
    }

    fn review_again(&mut self, index: u64, guidance: Option<&str>) -> Result<Draft, EngineError> {
        let (review, calls) = self.review_last(index, guidance)?;
        self.state.review_requested = false;
        if review.branch == BranchType::Interrupt {
            self.stop(HaltReason::Interrupt);
        }
        Ok(Draft::new(Role::Reviewer, review, calls))
    }

    fn finalize_step(&mut self, index: u64, guidance: Option<&str>) -> Result<Draft, EngineError> {
        let agents = self.agents.clone();
        let window = self.window(Role::Planner);
        let turn = Turn { session: &self.state.id, step: index, short_term: &window, guidance };
        let (out, FinalAnswer { answer, note }) = agents.finalize(
            &turn,
            &self.state.request,
            &self.state.context.question,
            &self.state.context.gathered_information,
        )?;
        self.remember(Role::Planner, index, &out.response);
        match route(Role::Planner, out.response.branch).expect("validated") {
            Route::Interrupt => self.stop(HaltReason::Interrupt),
            _ => self.state.phase = Phase::Done { answer, note },
        }
        Ok(Draft::new(Role::Planner, out.response, out.calls))
    }

    /// Lifts a revivable halt.
    fn revive(&mut self) {
        if let Phase::Halted { reason } = self.state.phase {
            if reason.revivable() {
                if let Some(phase) = self.state.resume_phase.take() {
                    self.state.phase = phase;
                }
            }
        }
    }

    fn grant(&mut self) {
        self.revive();
        self.state.awaiting = false;
        if self.state.mode == InteractionMode::Active {
            self.state.permit = true;
        }
    }

    /// Applies a human command. Rejections leave the session unchanged.
    pub fn command(&mut self, command: Command) -> Result<(), CommandError> {
        let phase = self.state.phase.clone();
        let reject = |why: &str| Err(CommandError::NotAcceptable(why.to_string()));
        match command {
            Command::Rollback { step } => return self.rollback(step),
            Command::Abort => {
                if matches!(phase, Phase::Done { .. } | Phase::Halted { reason: HaltReason::Abort }) {
                    return reject("session already finished");
                }
                self.state.phase = Phase::Halted { reason: HaltReason::Abort };
                self.state.resume_phase = None;
                self.state.awaiting = false;
                self.state.permit = false;
            }
            Command::Resume => {
                if phase.is_final() {
                    return reject("session already finished");
                }
                if self.state.mode == InteractionMode::Automatic && !self.state.awaiting {
                    return reject("automatic sessions take no commands while running");
                }
                self.grant();
            }
            Command::Guide { text } => {
                if phase.is_final() {
                    return reject("session already finished");
                }
                if !self.command_window() {
                    return reject("guidance is only accepted while the session waits for a command");
                }
                if text.trim().is_empty() {
                    return reject("guidance text is empty");
                }
                self.state.pending_guidance.push(text);
                self.grant();
            }
            Command::SwitchRole { role } => {
                if phase.is_final() {
                    return reject("session already finished");
                }
                if !self.command_window() {
                    return reject("roles can only be switched while the session waits for a command");
                }
                let target = Role::parse_name(&role)
                    .filter(|r| r.is_llm_role())
                    .ok_or_else(|| CommandError::UnknownRole(role.clone()))?;
                self.switch_role(target)?;
            }
        }
        self.persist_meta().map_err(|e| CommandError::Persistence(e.to_string()))
    }

    fn switch_role(&mut self, role: Role) -> Result<(), CommandError> {
        let current = match &self.state.phase {
            Phase::Halted { .. } => self.state.resume_phase.clone().unwrap_or(Phase::Planning),
            other => other.clone(),
        };
        match role {
            Role::Planner => self.state.phase = Phase::Planning,
            Role::TaskScheduler => {
                if self.state.subtasks.is_empty() {
                    return Err(CommandError::NotAcceptable("there are no subtasks to schedule yet".into()));
                }
                self.state.phase = Phase::Scheduling;
            }
            Role::Reviewer => {
                if self.state.last_action.is_none() {
                    return Err(CommandError::NotAcceptable("no operation has been executed yet".into()));
                }
                self.state.review_requested = true;
                self.state.phase = current;
            }
            pool => {
                let index = match current {
                    Phase::Deciding { assignment, .. } if assignment < self.state.assignments.len() => {
                        self.state.assignments[assignment].role = pool;
                        assignment
                    }
                    _ => {
                        let tasks = if self.state.subtasks.is_empty() {
                            vec![self.state.request.clone()]
                        } else {
                            self.state.subtasks.clone()
                        };
                        if current != Phase::Finalizing {
                            self.state.assignments.clear();
                        }
                        self.state.assignments.push(Assignment { role: pool, tasks });
                        self.state.assignments.len() - 1
                    }
                };
                self.enter_assignment(index);
            }
        }
        if role != Role::Reviewer {
            self.state.review_requested = false;
        }
        self.state.resume_phase = None;
        Ok(())
    }

    /// Restores the state after record `step`, archiving later records.
    pub fn rollback(&mut self, step: u64) -> Result<(), CommandError> {
        let Some(record) = self.log.get(step as usize) else {
            return Err(CommandError::NoSuchStep(step));
        };
        let mut state = SessionState::decode(&record.state_blob).map_err(|e| CommandError::Persistence(e.to_string()))?;
        self.env.restore(&state.env).map_err(|e| CommandError::Persistence(e.to_string()))?;
        self.agents.backend().import_state(&state.id, state.backend_state.as_ref());
        let suffix: Vec<StepRecord> = self.log.drain(step as usize + 1..).collect();
        state.awaiting = true;
        state.permit = false;
        state.pending_guidance.clear();
        self.state = state;
        if !suffix.is_empty() {
            let branch = ArchivedBranch { rollback_to: step, records: suffix };
            if let Some(store) = &self.store {
                store.append_archived(&branch).map_err(|e| CommandError::Persistence(e.to_string()))?;
            }
            self.archived.push(branch);
        }
        if let Some(store) = &self.store {
            store.rewrite_events(&self.log).map_err(|e| CommandError::Persistence(e.to_string()))?;
        }
        self.persist_meta().map_err(|e| CommandError::Persistence(e.to_string()))
    }

    /// Stores one long-term record per role that acted. A second call is a
    /// no-op.
    pub fn commit_memories(&mut self) -> Result<usize, EngineError> {
        if !self.state.phase.is_terminal() {
            return Err(EngineError::NotRunnable(self.state.phase.name()));
        }
        if self.memories_committed {
            return Ok(0);
        }
        let mut inserted = 0;
        for (role, window) in &self.state.short_term {
            if window.is_empty() {
                continue;
            }
            let summaries: Vec<&str> = window
                .entries()
                .iter()
                .map(|e| e.response.summary.trim())
                .filter(|s| !s.is_empty())
                .collect();
            let summary = if summaries.is_empty() {
                format!("{} turns for: {}", role.display_name(), self.state.request)
            } else {
                summaries.join(" ")
            };
            let content: Vec<String> = window.entries().iter().map(|e| e.response.to_json_string()).collect();
            self.agents
                .memory()
                .insert(*role, &summary, &content.join("\n"))
                .map_err(|e| EngineError::Agent(e.into()))?;
            inserted += 1;
        }
        self.memories_committed = true;
        self.persist_meta()?;
        Ok(inserted)
    }
}
