use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{Role, SchedulerPayload};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value")]
pub enum Violation {
    UnknownRole(String),
    MissingSubtask(String),
    DuplicateSubtask(String),
    /// Distributed text that is not one of the planner's subtasks.
    UnexpectedSubtask(String),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::UnknownRole(r) => write!(f, "unknown role {r:?}"),
            Violation::MissingSubtask(s) => write!(f, "subtask {s:?} was not assigned"),
            Violation::DuplicateSubtask(s) => write!(f, "subtask {s:?} was assigned more than once"),
            Violation::UnexpectedSubtask(s) => write!(f, "{s:?} is not one of the given subtasks"),
        }
    }
}

/// Checks that a distribution names only roster roles and hands out every
/// subtask exactly once. Subtasks are compared verbatim after trimming.
pub fn validate_distribution(
    payload: &SchedulerPayload,
    subtasks: &[String],
    roster: &[Role],
) -> Result<(), Vec<Violation>> {
    let mut violations = Vec::new();

    for entry in &payload.distribution {
        let known = Role::parse_name(&entry.role).is_some_and(|r| roster.contains(&r));
        if !known {
            violations.push(Violation::UnknownRole(entry.role.clone()));
        }
    }

    // (expected, distributed) counts per trimmed subtask, in first-seen order.
    let mut counts: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
    let mut order: Vec<&str> = Vec::new();
    for s in subtasks {
        let key = s.trim();
        let slot = counts.entry(key).or_insert_with(|| {
            order.push(key);
            (0, 0)
        });
        slot.0 += 1;
    }
    for task in payload.distribution.iter().flat_map(|e| e.role_tasks.iter()) {
        let key = task.trim();
        let slot = counts.entry(key).or_insert_with(|| {
            order.push(key);
            (0, 0)
        });
        slot.1 += 1;
    }
    for key in order {
        let (expected, got) = counts[key];
        if expected == 0 {
            violations.push(Violation::UnexpectedSubtask(key.to_string()));
        } else if got < expected {
            violations.push(Violation::MissingSubtask(key.to_string()));
        } else if got > expected {
            violations.push(Violation::DuplicateSubtask(key.to_string()));
        }
    }

    if violations.is_empty() {
        Ok(())
    } else {
        Err(violations)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::DistributionEntry;

    fn entry(role: &str, tasks: &[&str]) -> DistributionEntry {
        DistributionEntry { role: role.into(), role_tasks: tasks.iter().map(|s| s.to_string()).collect() }
    }

    fn subtasks(items: &[&str]) -> Vec<String> {
        items.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn covering_distribution_is_ok() {
        let payload = SchedulerPayload {
            distribution: vec![entry("Application Manager", &["s1"]), entry("Searcher", &[" s2 "])],
        };
        assert_eq!(validate_distribution(&payload, &subtasks(&["s1", "s2"]), &Role::POOL), Ok(()));
    }

    #[test]
    fn unknown_role() {
        let payload = SchedulerPayload { distribution: vec![entry("Translator", &["s1"])] };
        assert_eq!(
            validate_distribution(&payload, &subtasks(&["s1"]), &Role::POOL),
            Err(vec![Violation::UnknownRole("Translator".into())])
        );
    }

    #[test]
    fn role_outside_roster() {
        let payload = SchedulerPayload { distribution: vec![entry("Planner", &["s1"])] };
        assert!(validate_distribution(&payload, &subtasks(&["s1"]), &Role::POOL).is_err());
    }

    #[test]
    fn paraphrase_is_missing_plus_unexpected() {
        let payload = SchedulerPayload { distribution: vec![entry("Searcher", &["search the web"])] };
        assert_eq!(
            validate_distribution(&payload, &subtasks(&["Search the web."]), &Role::POOL),
            Err(vec![
                Violation::MissingSubtask("Search the web.".into()),
                Violation::UnexpectedSubtask("search the web".into()),
            ])
        );
    }
}
