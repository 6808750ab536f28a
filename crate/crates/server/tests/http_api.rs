mod common;

use common::*;
use serde_json::json;

#[tokio::test(flavor = "multi_thread")]
async fn automatic_session_runs_to_the_answer() {
    let server = Server::start().await;
    let api = Api::new(&server.base);
    let id = api.create_ok("automatic").await;
    let body = api.wait_phase(&id, "done").await;
    assert_eq!(body["status"]["phase"]["answer"], json!(CASE_ANSWER));
    assert_eq!(body["status"]["memories_committed"], json!(true));
    assert_eq!(api.events(&id).await.len(), CASE_RECORDS);

    let list: serde_json::Value = api.http.get(format!("{}/sessions", api.base)).send().await.unwrap().json().await.unwrap();
    assert_eq!(list.as_array().unwrap().len(), 1);
    assert_eq!(list[0]["id"], json!(id));
}

#[tokio::test(flavor = "multi_thread")]
async fn create_rejects_bad_bodies() {
    let server = Server::start().await;
    let api = Api::new(&server.base);

    let (status, _) = api.create(&json!({"mode": "automatic", "scenario": case_scenario()})).await;
    assert_eq!(status, 400);
    let (status, _) = api.create(&json!({"task": "  ", "scenario": case_scenario()})).await;
    assert_eq!(status, 400);
    let (status, _) = api.create(&json!({"task": "x", "mode": "sideways", "scenario": case_scenario()})).await;
    assert_eq!(status, 400);
    let res = api.http.post(format!("{}/sessions", api.base)).body("{not json").send().await.unwrap();
    assert_eq!(res.status().as_u16(), 400);

    let (status, body) = api
        .create(&json!({"task": "x", "scenario": "/no/such/scenario.json", "playbook": case_playbook()}))
        .await;
    assert_eq!(status, 422);
    assert!(body["error"].as_str().unwrap().contains("scenario"), "{body}");

    let dir = tempfile::tempdir().unwrap();
    let broken = dir.path().join("broken.json");
    std::fs::write(&broken, r#"{"apps": [{"name": "A", "foreground": true}, {"name": "B", "foreground": true}]}"#).unwrap();
    let (status, _) = api.create(&json!({"task": "x", "scenario": broken, "playbook": case_playbook()})).await;
    assert_eq!(status, 422);

    let (status, body) = api.create(&json!({"task": "x", "scenario": case_scenario(), "playbook": "/no/such/playbook.json"})).await;
    assert_eq!(status, 422, "{body}");
    // The scripted provider cannot run without a playbook.
    let (status, _) = api.create(&json!({"task": "x", "scenario": case_scenario()})).await;
    assert_eq!(status, 422);
}

#[tokio::test(flavor = "multi_thread")]
async fn unknown_sessions_are_404() {
    let server = Server::start().await;
    let api = Api::new(&server.base);
    assert_eq!(api.session("nope").await.0, 404);
    assert_eq!(api.command("nope", json!({"type": "resume"})).await.0, 404);
    let res = api.http.get(format!("{}/sessions/nope/events", api.base)).send().await.unwrap();
    assert_eq!(res.status().as_u16(), 404);
    assert!(tokio_tungstenite::connect_async(server.ws_url("nope")).await.is_err());
}

#[tokio::test(flavor = "multi_thread")]
async fn passive_and_active_sessions_start_paused() {
    let server = Server::start().await;
    let api = Api::new(&server.base);
    for mode in ["passive", "active"] {
        let id = api.create_ok(mode).await;
        tokio::time::sleep(std::time::Duration::from_millis(50)).await;
        let (_, body) = api.session(&id).await;
        assert_eq!(body["status"]["records"], json!(0), "{mode}");
        assert_eq!(body["status"]["awaiting"], json!(true), "{mode}");
    }
}

#[tokio::test(flavor = "multi_thread")]
async fn passive_resume_runs_to_completion() {
    let server = Server::start().await;
    let api = Api::new(&server.base);
    let id = api.create_ok("passive").await;
    assert_eq!(api.command(&id, json!({"type": "resume"})).await.0, 202);
    let body = api.wait_phase(&id, "done").await;
    assert_eq!(body["status"]["phase"]["answer"], json!(CASE_ANSWER));
}

#[tokio::test(flavor = "multi_thread")]
async fn command_rejections_are_409() {
    let server = Server::start().await;
    let api = Api::new(&server.base);

    let id = api.create_ok("automatic").await;
    let (status, body) = api.command(&id, json!({"type": "guide", "text": "look left"})).await;
    assert_eq!(status, 409, "{body}");
    assert!(body["error"].as_str().is_some());
    api.wait_phase(&id, "done").await;
    assert_eq!(api.command(&id, json!({"type": "abort"})).await.0, 409);

    let id = api.create_ok("active").await;
    assert_eq!(api.command(&id, json!({"type": "rollback", "step": 9})).await.0, 409);
    assert_eq!(api.command(&id, json!({"type": "switch_role", "role": "Wizard"})).await.0, 409);
    assert_eq!(api.command(&id, json!({"type": "guide", "text": " "})).await.0, 409);
    assert_eq!(api.command(&id, json!({"type": "teleport"})).await.0, 400);
    let res = api.http.post(format!("{}/sessions/{id}/commands", api.base)).body("[]").send().await.unwrap();
    assert_eq!(res.status().as_u16(), 400);
}

#[tokio::test(flavor = "multi_thread")]
async fn rollback_on_a_paused_session_truncates() {
    let server = Server::start().await;
    let api = Api::new(&server.base);
    let id = api.create_ok("active").await;
    for _ in 0..5 {
        api.step(&id).await;
    }
    let before = api.events(&id).await;
    assert_eq!(before.len(), 5);

    let mut socket = connect(&server.ws_url(&id)).await;
    let backfill = frames_until(&mut socket, |f| f["kind"] == "status").await;
    assert_eq!(backfill.len(), 6);

    let (status, _) = api.command(&id, json!({"type": "rollback", "step": 3})).await;
    assert_eq!(status, 202);
    let frame = next_frame(&mut socket).await;
    assert_eq!(frame["kind"], "rollback");
    assert_eq!(frame["body"]["step"], json!(3));
    assert_eq!(frame["body"]["archived"]["records"].as_array().unwrap().len(), 1);

    let after = api.events(&id).await;
    assert_eq!(after, before[..4].to_vec());
    let archived = api.archived(&id).await;
    assert_eq!(archived[0]["rollback_to"], json!(3));
}

#[tokio::test(flavor = "multi_thread")]
async fn abort_halts_with_reason_abort() {
    let server = Server::start().await;
    let api = Api::new(&server.base);
    let id = api.create_ok("active").await;
    api.step(&id).await;
    assert_eq!(api.command(&id, json!({"type": "abort"})).await.0, 202);
    let (_, body) = api.session(&id).await;
    assert_eq!(body["status"]["phase"], json!({"kind": "halted", "reason": "abort"}));
    assert_eq!(body["state"]["phase"], json!({"kind": "halted", "reason": "abort"}));
}

#[tokio::test(flavor = "multi_thread")]
async fn events_from_offset() {
    let server = Server::start().await;
    let api = Api::new(&server.base);
    let id = api.create_ok("automatic").await;
    api.wait_phase(&id, "done").await;
    let all = api.events(&id).await;
    let tail: Vec<cola_core::orchestrator::StepRecord> =
        api.http.get(format!("{}/sessions/{id}/events?from=9", api.base)).send().await.unwrap().json().await.unwrap();
    assert_eq!(tail, all[9..].to_vec());
}
