//! User-message rendering for each kind of agent call.

use crate::actions::AuthError;
use crate::env::PerceptionBundle;
use crate::memory::{MemoryRecord, ShortTermEntry};
use crate::model::{ActionInvocation, Role, Violation};

const RECORD_CONTENT_LIMIT: usize = 2000;

pub struct DecideInput<'a> {
    pub request: &'a str,
    pub question: &'a str,
    pub subtasks: &'a [String],
    pub perception: &'a PerceptionBundle,
    pub last_result: Option<&'a str>,
    /// The reviewer's judgement of this agent's previous operation.
    pub judgement: Option<&'a str>,
}

pub struct ReviewInput<'a> {
    pub intention: &'a str,
    pub operation: &'a ActionInvocation,
    pub result: Option<&'a str>,
    pub before: &'a PerceptionBundle,
    pub after: &'a PerceptionBundle,
    pub diff: &'a str,
}

fn clip(text: &str) -> &str {
    match text.char_indices().nth(RECORD_CONTENT_LIMIT) {
        Some((i, _)) => &text[..i],
        None => text,
    }
}

pub fn long_term_block(n: usize, records: &[MemoryRecord]) -> String {
    let mut out = format!("## Long-term memory (n={n})\n");
    if records.is_empty() {
        out.push_str("(no relevant records)\n");
    }
    for r in records {
        out.push_str(&format!("### Record {}\nSummary: {}\n{}\n", r.id, r.summary, clip(&r.content)));
    }
    out
}

pub fn short_term_block(m: usize, entries: &[ShortTermEntry]) -> String {
    let mut out = format!("## Short-term memory (m={m})\n");
    if entries.is_empty() {
        out.push_str("(no earlier responses in this task)\n");
    }
    for e in entries {
        out.push_str(&format!("Step {}: {}\n", e.step, e.response.to_json_string()));
    }
    out
}

pub fn guidance_block(text: &str) -> String {
    format!("## Human guidance (high priority)\n{text}\n")
}

fn numbered(items: &[String]) -> String {
    items.iter().enumerate().map(|(i, s)| format!("{}. {s}\n", i + 1)).collect()
}

pub fn plan_context(request: &str, feedback: Option<&str>) -> String {
    let mut out = format!("## Task\n{request}\n");
    if let Some(problem) = feedback.filter(|p| !p.is_empty()) {
        out.push_str(&format!("## Problem reported downstream\n{problem}\nRevise the subtask list accordingly.\n"));
    }
    out
}

pub fn schedule_context(request: &str, subtasks: &[String], feedback: Option<&str>) -> String {
    let mut out = format!("## Task\n{request}\n## Subtasks\n{}", numbered(subtasks));
    if let Some(problem) = feedback.filter(|p| !p.is_empty()) {
        out.push_str(&format!("## Problem reported by a decision agent\n{problem}\n"));
    }
    out
}

pub fn decide_context(input: &DecideInput<'_>) -> String {
    let mut out = format!("## Task\n{}\n", input.request);
    if !input.question.is_empty() {
        out.push_str(&format!("## Question to answer\n{}\n", input.question));
    }
    out.push_str(&format!("## Your subtasks\n{}", numbered(input.subtasks)));
    out.push_str(&format!(
        "## Current screen\n{}## Annotated screen\n{}## Controls\n{}",
        input.perception.raw_view,
        input.perception.annotated_view,
        if input.perception.controls_listing.is_empty() { "(none)\n" } else { &input.perception.controls_listing }
    ));
    if let Some(result) = input.last_result {
        out.push_str(&format!("## Result of the last operation\n{result}\n"));
    }
    if let Some(judgement) = input.judgement {
        out.push_str(&format!("## Reviewer judgement of your last operation\n{judgement}\n"));
    }
    out
}

pub fn review_context(input: &ReviewInput<'_>) -> String {
    let operation = serde_json::to_string(input.operation).expect("invocations serialize");
    format!(
        "## Intention\n{}\n## Operation\n{operation}\n## Result\n{}\n## Screen before\n{}## Screen after\n{}## Observed changes\n{}\n",
        input.intention,
        input.result.unwrap_or("(no result)"),
        input.before.annotated_view,
        input.after.annotated_view,
        input.diff
    )
}

pub fn finalize_context(request: &str, question: &str, gathered: &[String]) -> String {
    let mut out = format!("## Task\n{request}\n");
    if question.trim().is_empty() {
        out.push_str("## Question\n(none)\n");
    } else {
        out.push_str(&format!("## Question\n{question}\n"));
    }
    out.push_str("## Gathered information\n");
    if gathered.is_empty() {
        out.push_str("(nothing was gathered)\n");
    } else {
        out.push_str(&numbered(gathered));
    }
    out.push_str(
        "All subtasks are finished. Reply with a JSON object holding `branch`, `problem`, `message`, `summary` and `answer`. \
         Put the final answer to the question, in the format it asks for, in `answer`. \
         If there is no question, put a short summary of what was done in `answer` instead.\n",
    );
    out
}

pub fn distribution_repair(violations: &[Violation], roster: &[Role]) -> String {
    let listed: Vec<String> = violations.iter().map(|v| format!("- {v}")).collect();
    let roles: Vec<&str> = roster.iter().map(|r| r.display_name()).collect();
    format!(
        "Your distribution is invalid:\n{}\nAssign every subtask, verbatim, to exactly one of these roles: {}. Reply again with the corrected JSON object.",
        listed.join("\n"),
        roles.join(", ")
    )
}

pub fn authorization_repair(err: &AuthError, actions: &str) -> String {
    format!("Your operation was rejected: {err}\nUse only these operations:\n{actions}Reply again with the corrected JSON object.")
}
