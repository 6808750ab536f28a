//! Shared vocabulary: roles, branches, response envelopes and task context.

mod distribution;
pub mod extract;
mod response;
mod role;

use serde::{Deserialize, Serialize};

pub use distribution::{validate_distribution, Violation};
pub use response::{
    parse_agent_response, parse_with_schema, ActionInvocation, AgentResponse, AnswerPayload, DecisionPayload,
    DistributionEntry, Payload, PlannerPayload, ResponseSchema, ReviewerPayload, SchedulerPayload, Verdict,
};
pub use role::{Role, UnknownRole};

/// Control-flow field carried by every agent response.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BranchType {
    Continue,
    Interrupt,
    RemakeSubtasks,
    RoleTaskFinish,
    TaskMismatch,
}

impl BranchType {
    pub const ALL: [BranchType; 5] = [
        BranchType::Continue,
        BranchType::Interrupt,
        BranchType::RemakeSubtasks,
        BranchType::RoleTaskFinish,
        BranchType::TaskMismatch,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            BranchType::Continue => "Continue",
            BranchType::Interrupt => "Interrupt",
            BranchType::RemakeSubtasks => "RemakeSubtasks",
            BranchType::RoleTaskFinish => "RoleTaskFinish",
            BranchType::TaskMismatch => "TaskMismatch",
        }
    }

    pub fn parse(raw: &str) -> Option<BranchType> {
        let raw = raw.trim();
        Self::ALL.into_iter().find(|b| b.as_str().eq_ignore_ascii_case(raw))
    }

    /// Branches that must explain themselves in `problem`.
    pub fn reports_problem(self) -> bool {
        matches!(self, BranchType::Interrupt | BranchType::RemakeSubtasks | BranchType::TaskMismatch)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ModelError {
    #[error("malformed response: {0}")]
    MalformedResponse(String),
    #[error("branch {} is not admissible for role {}", .branch.as_str(), .role.id())]
    InadmissibleBranch { role: Role, branch: BranchType },
}

/// A block of coarse subtasks handed to one decision agent.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assignment {
    pub role: Role,
    pub tasks: Vec<String>,
}

/// What the agents know about the task at hand.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct TaskContext {
    pub request: String,
    pub question: String,
    pub current_assignment: Option<Assignment>,
    /// Append-only.
    pub gathered_information: Vec<String>,
}

impl TaskContext {
    pub fn new(request: impl Into<String>) -> Self {
        Self { request: request.into(), ..Default::default() }
    }

    pub fn gather(&mut self, info: impl Into<String>) {
        let info = info.into();
        if !info.trim().is_empty() {
            self.gathered_information.push(info);
        }
    }
}
