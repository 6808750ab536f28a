#![allow(dead_code)]

use std::io::{BufRead, BufReader};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::{Child, Command as Process, Stdio};
use std::sync::Arc;
use std::time::{Duration, Instant};

use cola_core::orchestrator::{SessionState, StepRecord};
use cola_server::config::{BackendProvider, ClockKind};
use cola_server::{router, App, Runtime, ServiceConfig};
use futures::{SinkExt, StreamExt};
use serde_json::{json, Value};
use tokio_tungstenite::tungstenite::Message;

pub const CASE_TASK: &str =
    "Using the browser, find the year in which the birthplace of Example Novelist was incorporated as a borough.";
pub const CASE_ANSWER: &str = "1926";
pub const CASE_RECORDS: usize = 12;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures").join(name)
}

pub fn case_scenario() -> PathBuf {
    fixture("gaia-case-1.scenario.json")
}

pub fn case_playbook() -> PathBuf {
    fixture("gaia-case-1.playbook.json")
}

pub fn test_config(root: &Path) -> ServiceConfig {
    ServiceConfig {
        listen: "127.0.0.1:0".into(),
        sessions_dir: root.join("sessions"),
        memory_dir: root.join("memory"),
        backend: BackendProvider::Scripted,
        clock: ClockKind::Logical,
        ..ServiceConfig::default()
    }
}

/// Writes `config` as a TOML file under `root`.
pub fn write_config(root: &Path, config: &ServiceConfig) -> PathBuf {
    let path = root.join("cola.toml");
    std::fs::write(&path, toml::to_string(config).unwrap()).unwrap();
    path
}

/// An in-process service on an ephemeral port.
pub struct Server {
    pub base: String,
    pub app: Arc<App>,
    _dir: tempfile::TempDir,
}

impl Server {
    pub async fn start() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let config = test_config(dir.path());
        config.ensure_dirs().unwrap();
        let app = Arc::new(App::new(Arc::new(Runtime::new(config).unwrap())));
        let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
        let addr = listener.local_addr().unwrap();
        let service = router(app.clone());
        tokio::spawn(async move { axum::serve(listener, service).await.unwrap() });
        Self { base: format!("http://{addr}"), app, _dir: dir }
    }

    pub fn ws_url(&self, id: &str) -> String {
        format!("{}/sessions/{id}/ws", self.base.replace("http://", "ws://"))
    }
}

pub fn case_body(mode: &str) -> Value {
    json!({"task": CASE_TASK, "mode": mode, "scenario": case_scenario(), "playbook": case_playbook()})
}

/// HTTP helpers shared by the in-process and subprocess tests.
pub struct Api {
    pub base: String,
    pub http: reqwest::Client,
}

impl Api {
    pub fn new(base: impl Into<String>) -> Self {
        Self { base: base.into(), http: reqwest::Client::new() }
    }

    pub async fn create(&self, body: &Value) -> (u16, Value) {
        let res = self.http.post(format!("{}/sessions", self.base)).json(body).send().await.unwrap();
        let status = res.status().as_u16();
        (status, res.json().await.unwrap_or(Value::Null))
    }

    pub async fn create_ok(&self, mode: &str) -> String {
        let (status, body) = self.create(&case_body(mode)).await;
        assert_eq!(status, 201, "{body}");
        body["session_id"].as_str().unwrap().to_string()
    }

    pub async fn command(&self, id: &str, command: Value) -> (u16, Value) {
        let res = self
            .http
            .post(format!("{}/sessions/{id}/commands", self.base))
            .json(&json!({ "command": command }))
            .send()
            .await
            .unwrap();
        let status = res.status().as_u16();
        (status, res.json().await.unwrap_or(Value::Null))
    }

    pub async fn session(&self, id: &str) -> (u16, Value) {
        let res = self.http.get(format!("{}/sessions/{id}", self.base)).send().await.unwrap();
        let status = res.status().as_u16();
        (status, res.json().await.unwrap_or(Value::Null))
    }

    pub async fn events(&self, id: &str) -> Vec<StepRecord> {
        let res = self.http.get(format!("{}/sessions/{id}/events", self.base)).send().await.unwrap();
        assert_eq!(res.status().as_u16(), 200);
        res.json().await.unwrap()
    }

    pub async fn archived(&self, id: &str) -> Value {
        self.http.get(format!("{}/sessions/{id}/archived", self.base)).send().await.unwrap().json().await.unwrap()
    }

    /// Polls until `done` holds for the session body or the deadline passes.
    pub async fn wait_for(&self, id: &str, what: &str, done: impl Fn(&Value) -> bool) -> Value {
        let deadline = Instant::now() + Duration::from_secs(10);
        loop {
            let (_, body) = self.session(id).await;
            if done(&body) {
                return body;
            }
            assert!(Instant::now() < deadline, "timed out waiting for {what}: {body}");
            tokio::time::sleep(Duration::from_millis(5)).await;
        }
    }

    pub async fn wait_records(&self, id: &str, n: u64) -> Value {
        self.wait_for(id, &format!("{n} records"), |b| b["status"]["records"] == json!(n)).await
    }

    pub async fn wait_phase(&self, id: &str, phase: &str) -> Value {
        self.wait_for(id, phase, |b| b["status"]["phase"]["kind"] == json!(phase)).await
    }

    /// One permitted step of an Active session.
    pub async fn step(&self, id: &str) {
        let (_, body) = self.session(id).await;
        let before = body["status"]["records"].as_u64().unwrap();
        let (status, reply) = self.command(id, json!({"type": "resume"})).await;
        assert_eq!(status, 202, "{reply}");
        self.wait_records(id, before + 1).await;
    }

    /// Resumes an Active session step by step until it is done.
    pub async fn finish(&self, id: &str) -> Value {
        for _ in 0..64 {
            let (_, body) = self.session(id).await;
            if body["status"]["phase"]["kind"] == json!("done") {
                return body;
            }
            self.step(id).await;
        }
        panic!("session {id} did not finish");
    }
}

pub type Socket = tokio_tungstenite::WebSocketStream<tokio_tungstenite::MaybeTlsStream<tokio::net::TcpStream>>;

pub async fn connect(url: &str) -> Socket {
    tokio_tungstenite::connect_async(url).await.expect("websocket connects").0
}

pub async fn next_frame(socket: &mut Socket) -> Value {
    loop {
        let msg = tokio::time::timeout(Duration::from_secs(10), socket.next())
            .await
            .expect("frame within 10s")
            .expect("socket open")
            .expect("frame");
        if let Message::Text(text) = msg {
            return serde_json::from_str(text.as_str()).unwrap();
        }
    }
}

/// Reads frames until one of `kind` arrives, returning everything read.
pub async fn frames_until(socket: &mut Socket, stop: impl Fn(&Value) -> bool) -> Vec<Value> {
    let mut out = Vec::new();
    loop {
        let frame = next_frame(socket).await;
        let last = stop(&frame);
        out.push(frame);
        if last {
            return out;
        }
    }
}

pub async fn send_command(socket: &mut Socket, command: Value) {
    let frame = json!({"v": 1, "kind": "command", "body": command});
    socket.send(Message::Text(frame.to_string().into())).await.unwrap();
}

/// Records with the session id blanked, so runs under different ids compare.
pub fn normalize(records: &[StepRecord]) -> Vec<StepRecord> {
    records
        .iter()
        .map(|r| {
            let mut r = r.clone();
            let mut state = SessionState::decode(&r.state_blob).unwrap();
            state.id = String::new();
            r.state_blob = state.encode();
            r
        })
        .collect()
}

pub fn normalize_state(mut state: Value) -> Value {
    state["id"] = json!("");
    state
}

/// A `cola serve` child process.
pub struct ServeProcess {
    pub child: Child,
    pub addr: SocketAddr,
}

impl ServeProcess {
    pub fn spawn(config: &Path) -> Self {
        let mut child = Process::new(env!("CARGO_BIN_EXE_cola"))
            .args(["serve", "--config"])
            .arg(config)
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .expect("spawn cola serve");
        let mut line = String::new();
        BufReader::new(child.stdout.take().unwrap()).read_line(&mut line).unwrap();
        let addr = line.trim().strip_prefix("listening on ").expect("listen line").parse().unwrap();
        Self { child, addr }
    }

    pub fn base(&self) -> String {
        format!("http://{}", self.addr)
    }

    pub fn kill(mut self) {
        self.child.kill().unwrap();
        self.child.wait().unwrap();
    }
}

impl Drop for ServeProcess {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}
