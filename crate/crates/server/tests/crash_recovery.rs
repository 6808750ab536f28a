mod common;

use common::*;
use serde_json::json;

#[tokio::test(flavor = "multi_thread")]
async fn killed_service_recovers_sessions() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), &test_config(dir.path()));

    let first = ServeProcess::spawn(&config);
    let api = Api::new(first.base());
    let id = api.create_ok("active").await;
    let reference = api.create_ok("active").await;
    for _ in 0..6 {
        api.step(&id).await;
    }
    let (_, before) = api.session(&id).await;
    let log_before = api.events(&id).await;
    assert_eq!(log_before.len(), 6);
    first.kill();

    let second = ServeProcess::spawn(&config);
    let api = Api::new(second.base());
    let (status, after) = api.session(&id).await;
    assert_eq!(status, 200);
    assert_eq!(after["state"], before["state"]);
    assert_eq!(after["status"], before["status"]);
    assert_eq!(api.events(&id).await, log_before);

    let mut socket = connect(&format!("ws://{}/sessions/{id}/ws", second.addr)).await;
    let backfill = frames_until(&mut socket, |f| f["kind"] == "status").await;
    let streamed: Vec<_> = backfill.iter().filter(|f| f["kind"] == "step").map(|f| f["body"].clone()).collect();
    assert_eq!(streamed, serde_json::to_value(&log_before).unwrap().as_array().unwrap().clone());

    assert_eq!(api.command(&id, json!({"type": "rollback", "step": 3})).await.0, 202);
    assert_eq!(api.events(&id).await, log_before[..4].to_vec());

    let done = api.finish(&id).await;
    assert_eq!(done["status"]["phase"]["answer"], json!(CASE_ANSWER));
    api.finish(&reference).await;
    assert_eq!(normalize(&api.events(&id).await), normalize(&api.events(&reference).await));
    assert_eq!(api.archived(&id).await.as_array().unwrap().len(), 1);
}

#[tokio::test(flavor = "multi_thread")]
async fn finished_sessions_stay_finished_after_restart() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), &test_config(dir.path()));
    let first = ServeProcess::spawn(&config);
    let api = Api::new(first.base());
    let id = api.create_ok("automatic").await;
    api.wait_phase(&id, "done").await;
    let log = api.events(&id).await;
    first.kill();

    let second = ServeProcess::spawn(&config);
    let api = Api::new(second.base());
    let (_, body) = api.session(&id).await;
    assert_eq!(body["status"]["phase"]["answer"], json!(CASE_ANSWER));
    assert_eq!(body["status"]["memories_committed"], json!(true));
    assert_eq!(api.events(&id).await, log);
}
