use serde::{Deserialize, Serialize};

use super::MemoryError;
use crate::model::{AgentResponse, Role};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShortTermEntry {
    pub step: u64,
    pub response: AgentResponse,
}

/// One agent's responses within the current session, oldest first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShortTermWindow {
    owner_role: Role,
    entries: Vec<ShortTermEntry>,
}

impl ShortTermWindow {
    pub fn new(owner_role: Role) -> Self {
        Self { owner_role, entries: Vec::new() }
    }

    pub fn owner_role(&self) -> Role {
        self.owner_role
    }

    pub fn entries(&self) -> &[ShortTermEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn push(&mut self, step: u64, response: AgentResponse) -> Result<(), MemoryError> {
        if let Some(last) = self.entries.last() {
            if step <= last.step {
                return Err(MemoryError::OutOfOrder { last: last.step, step });
            }
        }
        self.entries.push(ShortTermEntry { step, response });
        Ok(())
    }

    /// The most recent `min(m, len)` entries in step order.
    pub fn window(&self, m: usize) -> &[ShortTermEntry] {
        let start = self.entries.len().saturating_sub(m);
        &self.entries[start..]
    }

    /// Drops entries recorded after `step`.
    pub fn truncate_after(&mut self, step: u64) {
        self.entries.retain(|e| e.step <= step);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{BranchType, Payload, PlannerPayload};

    fn resp(i: u64) -> AgentResponse {
        AgentResponse {
            role: Role::Planner,
            branch: BranchType::Continue,
            problem: String::new(),
            message: String::new(),
            summary: format!("step {i}"),
            payload: Payload::Planner(PlannerPayload { sub_tasks: vec!["x".into()], question: String::new() }),
        }
    }

    fn filled(n: u64) -> ShortTermWindow {
        let mut w = ShortTermWindow::new(Role::Planner);
        for i in 1..=n {
            w.push(i, resp(i)).unwrap();
        }
        w
    }

    #[test]
    fn last_six_of_ten() {
        let w = filled(10);
        let steps: Vec<u64> = w.window(6).iter().map(|e| e.step).collect();
        assert_eq!(steps, vec![5, 6, 7, 8, 9, 10]);
    }

    #[test]
    fn short_history_returns_all() {
        assert_eq!(filled(3).window(10).len(), 3);
    }

    #[test]
    fn rejects_out_of_order() {
        let mut w = filled(2);
        assert!(w.push(2, resp(2)).is_err());
    }

    #[test]
    fn truncate_keeps_prefix() {
        let mut w = filled(5);
        w.truncate_after(3);
        assert_eq!(w.len(), 3);
    }
}
