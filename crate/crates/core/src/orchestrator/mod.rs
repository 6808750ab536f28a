//! Session state machine: plan, schedule, then decide/execute/review until
//! every assignment is finished, with a step budget, per-step checkpoints,
//! rollback, role switching, guidance and three interaction modes.

mod session;
mod store;

use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::agents::AgentError;
use crate::env::EnvError;
use crate::model::{ActionInvocation, AgentResponse, BranchType, ModelError, Role};

pub use session::{ArchivedBranch, Session, SessionState, SessionStatus, DEFAULT_BUDGET};
pub use store::{SessionMeta, SessionStore, StoredSession};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InteractionMode {
    /// No human involvement.
    Automatic,
    /// Runs on its own and parks when it needs help.
    Passive,
    /// Every step waits for a human go-ahead.
    Active,
}

impl FromStr for InteractionMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "automatic" | "auto" => Ok(InteractionMode::Automatic),
            "passive" => Ok(InteractionMode::Passive),
            "active" => Ok(InteractionMode::Active),
            other => Err(format!("unknown interaction mode `{other}`")),
        }
    }
}

impl fmt::Display for InteractionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            InteractionMode::Automatic => "automatic",
            InteractionMode::Passive => "passive",
            InteractionMode::Active => "active",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HaltReason {
    Budget,
    Interrupt,
    Validation,
    /// A backend failure other than invalid output.
    Error,
    Abort,
}

impl HaltReason {
    /// Halts a human command can undo without rolling back.
    pub fn revivable(self) -> bool {
        matches!(self, HaltReason::Interrupt | HaltReason::Validation | HaltReason::Error)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Phase {
    Planning,
    Scheduling,
    Deciding { role: Role, assignment: usize },
    Finalizing,
    Halted { reason: HaltReason },
    Done { answer: String, #[serde(default, skip_serializing_if = "Option::is_none")] note: Option<String> },
}

impl Phase {
    pub fn is_terminal(&self) -> bool {
        matches!(self, Phase::Halted { .. } | Phase::Done { .. })
    }

    /// Done, or halted in a way only a rollback can undo.
    pub fn is_final(&self) -> bool {
        match self {
            Phase::Done { .. } => true,
            Phase::Halted { reason } => !reason.revivable(),
            _ => false,
        }
    }

    /// The role that acts in this phase.
    pub fn default_role(&self) -> Option<Role> {
        match self {
            Phase::Planning | Phase::Finalizing => Some(Role::Planner),
            Phase::Scheduling => Some(Role::TaskScheduler),
            Phase::Deciding { role, .. } => Some(*role),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Phase::Planning => "planning",
            Phase::Scheduling => "scheduling",
            Phase::Deciding { .. } => "deciding",
            Phase::Finalizing => "finalizing",
            Phase::Halted { .. } => "halted",
            Phase::Done { .. } => "done",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Command {
    Resume,
    Guide { text: String },
    SwitchRole { role: String },
    Rollback { step: u64 },
    Abort,
}

/// Where a validated response sends the session next.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Route {
    /// Planner produced subtasks (or, while finalizing, the answer).
    Schedule,
    /// Scheduler produced a distribution.
    Dispatch,
    /// Back to the planner with the reported problem.
    Replan,
    /// Same decision agent, same assignment.
    Stay,
    /// Assignment finished; move on or finalize.
    NextAssignment,
    /// Back to the scheduler with the reported problem.
    Reschedule,
    /// Judgement goes back to the deciding agent.
    ReturnJudgement,
    Interrupt,
}

/// The branch-routing table.
pub fn route(role: Role, branch: BranchType) -> Result<Route, ModelError> {
    if !role.admits(branch) {
        return Err(ModelError::InadmissibleBranch { role, branch });
    }
    if branch == BranchType::Interrupt {
        return Ok(Route::Interrupt);
    }
    Ok(match (role, branch) {
        (Role::Planner, _) => Route::Schedule,
        (Role::TaskScheduler, BranchType::Continue) => Route::Dispatch,
        (Role::TaskScheduler, _) => Route::Replan,
        (Role::Reviewer, _) => Route::ReturnJudgement,
        (_, BranchType::Continue) => Route::Stay,
        (_, BranchType::RoleTaskFinish) => Route::NextAssignment,
        (_, _) => Route::Reschedule,
    })
}

/// One advance of a session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub index: u64,
    /// Phase the step ran in.
    pub phase: Phase,
    pub acting_role: Role,
    pub response: Option<AgentResponse>,
    /// Operation handed to the executor.
    pub invocation: Option<ActionInvocation>,
    pub result: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub execution_error: Option<EnvError>,
    /// Reviewer response for the executed operation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub review: Option<AgentResponse>,
    pub env_before_hash: String,
    pub env_after_hash: String,
    /// Base64 JSON of the full session state after this step.
    pub state_blob: String,
    pub guidance: Option<String>,
    /// Gateway calls made during the step.
    pub calls: u32,
    pub timestamp: DateTime<Utc>,
}

impl StepRecord {
    /// Hex SHA-256 of the record's JSON.
    pub fn digest(&self) -> String {
        use sha2::{Digest, Sha256};
        let bytes = serde_json::to_vec(self).expect("records serialize");
        hex::encode(Sha256::digest(bytes))
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EngineError {
    #[error("the request must not be empty")]
    EmptyRequest,
    #[error("session is {0} and cannot advance")]
    NotRunnable(&'static str),
    #[error("session is waiting for a command")]
    AwaitingCommand,
    #[error("step budget of {budget} decision steps is exhausted")]
    BudgetExhausted { budget: u32 },
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error("persistence error: {0}")]
    Persistence(String),
    #[error("corrupt checkpoint: {0}")]
    Serialization(String),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CommandError {
    #[error("command not acceptable: {0}")]
    NotAcceptable(String),
    #[error("unknown role `{0}`")]
    UnknownRole(String),
    #[error("no step {0} in the event log")]
    NoSuchStep(u64),
    #[error("persistence error: {0}")]
    Persistence(String),
}
