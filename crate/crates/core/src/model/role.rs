use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::BranchType;

/// Every participant in the workflow. The executor is the only role that
/// never talks to a language model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Role {
    Planner,
    TaskScheduler,
    Reviewer,
    Executor,
    ApplicationManager,
    FileManager,
    Searcher,
    Programmer,
}

impl Role {
    /// The decision agent pool, in the order the scheduler sees it.
    pub const POOL: [Role; 4] = [
        Role::ApplicationManager,
        Role::FileManager,
        Role::Searcher,
        Role::Programmer,
    ];

    /// Roles that produce model responses.
    pub const LLM_ROLES: [Role; 7] = [
        Role::Planner,
        Role::TaskScheduler,
        Role::Reviewer,
        Role::ApplicationManager,
        Role::FileManager,
        Role::Searcher,
        Role::Programmer,
    ];

    pub const ALL: [Role; 8] = [
        Role::Planner,
        Role::TaskScheduler,
        Role::Reviewer,
        Role::Executor,
        Role::ApplicationManager,
        Role::FileManager,
        Role::Searcher,
        Role::Programmer,
    ];

    /// Stable snake_case identifier used in files, URLs and wire frames.
    pub fn id(self) -> &'static str {
        match self {
            Role::Planner => "planner",
            Role::TaskScheduler => "task_scheduler",
            Role::Reviewer => "reviewer",
            Role::Executor => "executor",
            Role::ApplicationManager => "application_manager",
            Role::FileManager => "file_manager",
            Role::Searcher => "searcher",
            Role::Programmer => "programmer",
        }
    }

    /// Human-facing name, also the name agents use in scheduler distributions.
    pub fn display_name(self) -> &'static str {
        match self {
            Role::Planner => "Planner",
            Role::TaskScheduler => "Task Scheduler",
            Role::Reviewer => "Reviewer",
            Role::Executor => "Executor",
            Role::ApplicationManager => "Application Manager",
            Role::FileManager => "File Manager",
            Role::Searcher => "Searcher",
            Role::Programmer => "Programmer",
        }
    }

    pub fn is_decision_agent(self) -> bool {
        Self::POOL.contains(&self)
    }

    pub fn is_llm_role(self) -> bool {
        self != Role::Executor
    }

    /// Branch values this role may emit. The executor emits none.
    pub fn admissible_branches(self) -> &'static [BranchType] {
        use BranchType::*;
        match self {
            Role::Planner | Role::Reviewer => &[Continue, Interrupt],
            Role::TaskScheduler => &[Continue, RemakeSubtasks, Interrupt],
            Role::ApplicationManager | Role::FileManager | Role::Searcher | Role::Programmer => {
                &[Continue, RoleTaskFinish, TaskMismatch, Interrupt]
            }
            Role::Executor => &[],
        }
    }

    pub fn admits(self, branch: BranchType) -> bool {
        self.admissible_branches().contains(&branch)
    }

    /// Lenient lookup: case-insensitive, ignoring spaces, dashes and underscores,
    /// so "Application Manager", "application_manager" and "ApplicationManager"
    /// all resolve.
    pub fn parse_name(name: &str) -> Option<Role> {
        let key: String = name
            .chars()
            .filter(|c| c.is_alphanumeric())
            .flat_map(char::to_lowercase)
            .collect();
        let role = match key.as_str() {
            "planner" => Role::Planner,
            "taskscheduler" | "scheduler" => Role::TaskScheduler,
            "reviewer" => Role::Reviewer,
            "executor" => Role::Executor,
            "applicationmanager" => Role::ApplicationManager,
            "filemanager" => Role::FileManager,
            "searcher" => Role::Searcher,
            "programmer" => Role::Programmer,
            _ => return None,
        };
        Some(role)
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.display_name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown role: {0}")]
pub struct UnknownRole(pub String);

impl FromStr for Role {
    type Err = UnknownRole;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Role::parse_name(s).ok_or_else(|| UnknownRole(s.to_string()))
    }
}

impl Serialize for Role {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.id())
    }
}

impl<'de> Deserialize<'de> for Role {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(deserializer)?;
        Role::parse_name(&raw).ok_or_else(|| serde::de::Error::custom(UnknownRole(raw)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for role in Role::ALL {
            assert_eq!(Role::parse_name(role.id()), Some(role));
            assert_eq!(Role::parse_name(role.display_name()), Some(role));
        }
        assert_eq!(Role::parse_name("Translator"), None);
    }

    #[test]
    fn executor_admits_nothing() {
        assert!(Role::Executor.admissible_branches().is_empty());
    }
}
