mod common;

use common::*;
use serde_json::{json, Value};

fn steps(frames: &[Value]) -> Vec<u64> {
    frames.iter().filter(|f| f["kind"] == "step").map(|f| f["body"]["index"].as_u64().unwrap()).collect()
}

#[tokio::test(flavor = "multi_thread")]
async fn backfill_then_live_tail() {
    let server = Server::start().await;
    let api = Api::new(&server.base);
    let id = api.create_ok("active").await;
    for _ in 0..4 {
        api.step(&id).await;
    }
    let mut socket = connect(&server.ws_url(&id)).await;
    let backfill = frames_until(&mut socket, |f| f["kind"] == "status").await;
    assert_eq!(steps(&backfill), vec![0, 1, 2, 3]);
    assert_eq!(backfill.len(), 5);
    assert!(backfill.iter().all(|f| f["v"] == json!(1)));

    api.step(&id).await;
    let live = frames_until(&mut socket, |f| f["kind"] == "step").await;
    assert_eq!(steps(&live), vec![4]);
    let events = api.events(&id).await;
    assert_eq!(serde_json::to_value(&events[4]).unwrap(), live.last().unwrap()["body"]);
}

#[tokio::test(flavor = "multi_thread")]
async fn every_record_arrives_once_in_order() {
    let server = Server::start().await;
    let api = Api::new(&server.base);
    let id = api.create_ok("passive").await;
    let mut socket = connect(&server.ws_url(&id)).await;
    frames_until(&mut socket, |f| f["kind"] == "status").await;
    send_command(&mut socket, json!({"type": "resume"})).await;
    let frames = frames_until(&mut socket, |f| f["kind"] == "status" && f["body"]["phase"]["kind"] == "done").await;
    assert_eq!(steps(&frames), (0..CASE_RECORDS as u64).collect::<Vec<_>>());
    assert_eq!(frames.iter().filter(|f| f["kind"] == "ack").count(), 1);
    let events = api.events(&id).await;
    let streamed: Vec<Value> = frames.iter().filter(|f| f["kind"] == "step").map(|f| f["body"].clone()).collect();
    assert_eq!(streamed, serde_json::to_value(&events).unwrap().as_array().unwrap().clone());
}

#[tokio::test(flavor = "multi_thread")]
async fn two_consoles_see_identical_frames() {
    let server = Server::start().await;
    let api = Api::new(&server.base);
    let id = api.create_ok("active").await;
    api.step(&id).await;
    api.step(&id).await;
    let mut a = connect(&server.ws_url(&id)).await;
    let mut b = connect(&server.ws_url(&id)).await;
    let mut seen_a = frames_until(&mut a, |f| f["kind"] == "status").await;
    let mut seen_b = frames_until(&mut b, |f| f["kind"] == "status").await;

    for _ in 0..4 {
        api.step(&id).await;
    }
    api.command(&id, json!({"type": "rollback", "step": 3})).await;
    api.command(&id, json!({"type": "guide", "text": "take the other link"})).await;
    api.step(&id).await;
    let end = |f: &Value| f["kind"] == "step" && f["body"]["guidance"].is_string();
    seen_a.extend(frames_until(&mut a, end).await);
    seen_b.extend(frames_until(&mut b, end).await);
    assert_eq!(seen_a, seen_b);
    assert_eq!(seen_a.iter().filter(|f| f["kind"] == "rollback").count(), 1);
    assert_eq!(steps(&seen_a), vec![0, 1, 2, 3, 4, 5, 4]);
}

#[tokio::test(flavor = "multi_thread")]
async fn reconnect_from_cursor_skips_seen_records() {
    let server = Server::start().await;
    let api = Api::new(&server.base);
    let id = api.create_ok("automatic").await;
    api.wait_phase(&id, "done").await;
    let mut socket = connect(&format!("{}?from=7", server.ws_url(&id))).await;
    let frames = frames_until(&mut socket, |f| f["kind"] == "status").await;
    assert_eq!(steps(&frames), (7..CASE_RECORDS as u64).collect::<Vec<_>>());
}

#[tokio::test(flavor = "multi_thread")]
async fn inbound_frames_are_validated() {
    let server = Server::start().await;
    let api = Api::new(&server.base);
    let id = api.create_ok("active").await;
    let mut socket = connect(&server.ws_url(&id)).await;
    frames_until(&mut socket, |f| f["kind"] == "status").await;

    use futures::SinkExt;
    use tokio_tungstenite::tungstenite::Message;
    for text in [
        r#"{"v":1,"kind":"subscribe","body":{}}"#,
        r#"{"v":2,"kind":"command","body":{"type":"resume"}}"#,
        r#"{"v":1,"kind":"command","body":{"type":"teleport"}}"#,
        "hello",
    ] {
        socket.send(Message::Text(text.into())).await.unwrap();
        let frame = frames_until(&mut socket, |f| f["kind"] == "rejected").await;
        assert!(frame.last().unwrap()["body"]["reason"].is_string());
    }
    send_command(&mut socket, json!({"type": "rollback", "step": 5})).await;
    let frame = frames_until(&mut socket, |f| f["kind"] == "rejected").await;
    assert!(frame.last().unwrap()["body"]["reason"].as_str().unwrap().contains("5"));
    assert_eq!(api.session(&id).await.1["status"]["records"], json!(0));
}

/// Drives one Active session through a fixed command script.
async fn script(api: &Api, id: &str, mut via_ws: Option<&mut Socket>) {
    let commands = [
        json!({"type": "resume"}),
        json!({"type": "resume"}),
        json!({"type": "resume"}),
        json!({"type": "resume"}),
        json!({"type": "resume"}),
        json!({"type": "rollback", "step": 2}),
        json!({"type": "switch_role", "role": "Searcher"}),
        json!({"type": "guide", "text": "use the search box"}),
    ];
    for command in commands {
        let (_, body) = api.session(id).await;
        let records = body["status"]["records"].as_u64().unwrap();
        let is_resume = command["type"] == "resume";
        match via_ws.as_deref_mut() {
            Some(socket) => {
                send_command(socket, command).await;
                let frames = frames_until(socket, |f| f["kind"] == "ack" || f["kind"] == "rejected").await;
                assert_eq!(frames.last().unwrap()["kind"], "ack");
            }
            None => assert_eq!(api.command(id, command).await.0, 202),
        }
        if is_resume {
            api.wait_records(id, records + 1).await;
        }
    }
}

#[tokio::test(flavor = "multi_thread")]
async fn http_and_websocket_commands_are_equivalent() {
    let server = Server::start().await;
    let api = Api::new(&server.base);
    let over_http = api.create_ok("active").await;
    let over_ws = api.create_ok("active").await;

    script(&api, &over_http, None).await;
    let mut socket = connect(&server.ws_url(&over_ws)).await;
    frames_until(&mut socket, |f| f["kind"] == "status").await;
    script(&api, &over_ws, Some(&mut socket)).await;

    // Let the guided step run on both.
    api.step(&over_http).await;
    api.step(&over_ws).await;

    let (_, a) = api.session(&over_http).await;
    let (_, b) = api.session(&over_ws).await;
    assert_eq!(normalize_state(a["state"].clone()), normalize_state(b["state"].clone()));
    assert_eq!(normalize(&api.events(&over_http).await), normalize(&api.events(&over_ws).await));
    assert_eq!(api.archived(&over_http).await.as_array().unwrap().len(), 1);
    let mut archived_a = api.archived(&over_http).await;
    let mut archived_b = api.archived(&over_ws).await;
    for branch in [&mut archived_a, &mut archived_b] {
        let records: Vec<cola_core::orchestrator::StepRecord> = serde_json::from_value(branch[0]["records"].clone()).unwrap();
        branch[0]["records"] = serde_json::to_value(normalize(&records)).unwrap();
    }
    assert_eq!(archived_a, archived_b);
}
