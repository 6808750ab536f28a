mod common;

use cola_core::env::load_scenario;
use cola_core::model::Role;
use cola_core::orchestrator::{HaltReason, InteractionMode, Phase};
use common::*;

#[test]
fn fixture_counts() {
    let s = load_scenario(&fixture("gaia-case-1.scenario.json")).unwrap();
    assert_eq!(s.initial.apps.len(), 4);
    assert_eq!(s.transitions.len(), 12);
}

#[test]
fn case_runs_to_expected_answer() {
    let rig = Rig::case();
    let mut session = rig.automatic();
    assert!(session.run_until_pause().is_none());
    match session.phase() {
        Phase::Done { answer, note } => {
            assert_eq!(answer, CASE_ANSWER);
            assert!(note.is_none());
        }
        other => panic!("unexpected phase {other:?}"),
    }
    assert!(session.state().step <= 20);
    assert!(session.log().len() >= 10);

    let schedule = &session.log()[1];
    assert_eq!(schedule.acting_role, Role::TaskScheduler);
    let dist = &schedule.response.as_ref().unwrap().scheduler().unwrap().distribution;
    let split: Vec<(Role, usize)> = dist.iter().map(|e| (Role::parse_name(&e.role).unwrap(), e.role_tasks.len())).collect();
    assert_eq!(split, vec![(Role::ApplicationManager, 1), (Role::Searcher, 3)]);
}

#[test]
fn failed_review_keeps_assignment_and_threads_judgement() {
    let rig = Rig::case();
    let mut session = rig.automatic();
    session.run_until_pause();
    let advert = session
        .log()
        .iter()
        .position(|r| r.review.as_ref().is_some_and(|v| v.reviewer().unwrap().judgement.ends_with("FAILURE")))
        .expect("one failed review");
    let next = &session.log()[advert + 1];
    assert_eq!(next.acting_role, Role::Searcher);
    let call = rig
        .backend
        .calls()
        .into_iter()
        .find(|c| c.role == Some(Role::Searcher) && c.step == next.index)
        .unwrap();
    assert!(call.request.messages[3].content.contains("sponsored advertisement"));
}

#[test]
fn commit_memories_once_per_acting_role() {
    let rig = Rig::case();
    let mut session = rig.automatic();
    session.run_until_pause();
    assert_eq!(session.commit_memories().unwrap(), 5);
    let sizes = rig.agents.memory().sizes();
    for role in [Role::Planner, Role::TaskScheduler, Role::ApplicationManager, Role::Searcher, Role::Reviewer] {
        assert_eq!(sizes.get(&role).copied().unwrap_or(0), 1, "{role:?}");
    }
    assert_eq!(session.commit_memories().unwrap(), 0);
    assert_eq!(rig.agents.memory().sizes(), sizes);
}

#[test]
fn budget_two_halts() {
    let rig = Rig::case();
    let mut session = rig.session(InteractionMode::Automatic, 2);
    let err = session.run_until_pause().expect("budget error");
    assert_eq!(err, cola_core::orchestrator::EngineError::BudgetExhausted { budget: 2 });
    assert_eq!(session.phase(), &Phase::Halted { reason: HaltReason::Budget });
    assert_eq!(session.state().step, 2);
}

#[test]
fn active_mode_needs_a_command_per_step() {
    use cola_core::orchestrator::{Command, EngineError};
    let rig = Rig::case();
    let mut session = rig.session(InteractionMode::Active, 20);
    assert_eq!(session.advance().unwrap_err(), EngineError::AwaitingCommand);
    session.command(Command::Resume).unwrap();
    session.advance().unwrap();
    assert_eq!(session.advance().unwrap_err(), EngineError::AwaitingCommand);
    session.command(Command::Guide { text: "prefer the encyclopedia".into() }).unwrap();
    let rec = session.advance().unwrap();
    assert_eq!(rec.guidance.as_deref(), Some("prefer the encyclopedia"));
}
