//! HTTP and WebSocket API over the session drivers.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::{Arc, RwLock};

use axum::body::Bytes;
use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use cola_core::orchestrator::{Command, CommandError, InteractionMode, SessionStore};
use serde::Deserialize;
use serde_json::json;
use tokio::sync::broadcast::error::RecvError;

use crate::driver::SessionHandle;
use crate::runtime::{Runtime, RuntimeError, SessionSpec};
use crate::wire::{parse_inbound, Frame};

/// Shared service state: the runtime plus every live session.
pub struct App {
    runtime: Arc<Runtime>,
    sessions: RwLock<BTreeMap<String, SessionHandle>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateSession {
    pub task: String,
    #[serde(default)]
    pub mode: Option<InteractionMode>,
    pub scenario: PathBuf,
    #[serde(default)]
    pub playbook: Option<PathBuf>,
    #[serde(default)]
    pub budget: Option<u32>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PostCommand {
    command: Command,
}

#[derive(Debug, Default, Deserialize)]
struct FromQuery {
    #[serde(default)]
    from: u64,
}

impl App {
    pub fn new(runtime: Arc<Runtime>) -> Self {
        Self { runtime, sessions: RwLock::new(BTreeMap::new()) }
    }

    pub fn runtime(&self) -> &Arc<Runtime> {
        &self.runtime
    }

    /// Reloads every persisted session, parked until a command arrives.
    /// Returns how many came back.
    pub fn recover_all(&self) -> usize {
        let dirs = match SessionStore::list(&self.runtime.config().sessions_dir) {
            Ok(d) => d,
            Err(e) => {
                tracing::error!(error = %e, "cannot list sessions");
                return 0;
            }
        };
        let mut recovered = 0;
        for dir in dirs {
            match self.runtime.recover(&dir) {
                Ok(mut session) => {
                    if let Err(e) = session.park() {
                        tracing::warn!(dir = %dir.display(), error = %e, "cannot park recovered session");
                    }
                    let handle = SessionHandle::spawn(session);
                    self.sessions.write().expect("sessions lock").insert(handle.id().to_string(), handle);
                    recovered += 1;
                }
                Err(e) => tracing::warn!(dir = %dir.display(), error = %e, "skipping unrecoverable session"),
            }
        }
        recovered
    }

    pub fn create(&self, request: CreateSession) -> Result<String, RuntimeError> {
        let config = self.runtime.config();
        let spec = SessionSpec {
            task: request.task,
            mode: request.mode.unwrap_or(config.default_mode),
            budget: request.budget.unwrap_or(config.default_budget),
            scenario: Some(request.scenario),
            playbook: request.playbook,
        };
        let id = uuid::Uuid::new_v4().simple().to_string();
        let session = self.runtime.start_persistent(&id, &spec)?;
        let handle = SessionHandle::spawn(session);
        self.sessions.write().expect("sessions lock").insert(id.clone(), handle);
        tracing::info!(session = %id, mode = %spec.mode, "session created");
        Ok(id)
    }

    pub fn get(&self, id: &str) -> Option<SessionHandle> {
        self.sessions.read().expect("sessions lock").get(id).cloned()
    }

    pub fn handles(&self) -> Vec<SessionHandle> {
        self.sessions.read().expect("sessions lock").values().cloned().collect()
    }

    pub fn shutdown(&self) {
        for handle in self.handles() {
            handle.stop();
        }
    }
}

fn error(status: StatusCode, message: impl Into<String>) -> Response {
    (status, Json(json!({ "error": message.into() }))).into_response()
}

fn not_found(id: &str) -> Response {
    error(StatusCode::NOT_FOUND, format!("no session `{id}`"))
}

pub fn router(app: Arc<App>) -> Router {
    Router::new()
        .route("/sessions", post(create_session).get(list_sessions))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/events", get(get_events))
        .route("/sessions/{id}/archived", get(get_archived))
        .route("/sessions/{id}/commands", post(post_command))
        .route("/sessions/{id}/ws", get(stream_events))
        .with_state(app)
}

async fn create_session(State(app): State<Arc<App>>, body: Bytes) -> Response {
    let request: CreateSession = match serde_json::from_slice(&body) {
        Ok(r) => r,
        Err(e) => return error(StatusCode::BAD_REQUEST, e.to_string()),
    };
    if request.task.trim().is_empty() {
        return error(StatusCode::BAD_REQUEST, "task must not be empty");
    }
    let worker = app.clone();
    match tokio::task::spawn_blocking(move || worker.create(request)).await {
        Ok(Ok(id)) => (StatusCode::CREATED, Json(json!({ "session_id": id }))).into_response(),
        Ok(Err(e)) if e.is_input_error() => error(StatusCode::UNPROCESSABLE_ENTITY, e.to_string()),
        Ok(Err(e)) => error(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()),
        Err(e) => error(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()),
    }
}

async fn list_sessions(State(app): State<Arc<App>>) -> Response {
    let statuses: Vec<_> = app.handles().iter().map(|h| h.published().status.clone()).collect();
    Json(statuses).into_response()
}

async fn get_session(State(app): State<Arc<App>>, Path(id): Path<String>) -> Response {
    let Some(handle) = app.get(&id) else { return not_found(&id) };
    let p = handle.published();
    Json(json!({ "status": p.status, "state": p.state })).into_response()
}

async fn get_events(State(app): State<Arc<App>>, Path(id): Path<String>, Query(q): Query<FromQuery>) -> Response {
    let Some(handle) = app.get(&id) else { return not_found(&id) };
    let p = handle.published();
    let events: Vec<_> = p.log.iter().skip(q.from as usize).collect();
    Json(events).into_response()
}

async fn get_archived(State(app): State<Arc<App>>, Path(id): Path<String>) -> Response {
    let Some(handle) = app.get(&id) else { return not_found(&id) };
    let p = handle.published();
    Json(&p.archived).into_response()
}

fn command_rejection(e: CommandError) -> Response {
    match e {
        CommandError::Persistence(m) => error(StatusCode::INTERNAL_SERVER_ERROR, m),
        other => error(StatusCode::CONFLICT, other.to_string()),
    }
}

async fn post_command(State(app): State<Arc<App>>, Path(id): Path<String>, body: Bytes) -> Response {
    let Some(handle) = app.get(&id) else { return not_found(&id) };
    let request: PostCommand = match serde_json::from_slice(&body) {
        Ok(r) => r,
        Err(e) => return error(StatusCode::BAD_REQUEST, e.to_string()),
    };
    match handle.command(request.command).await {
        Ok(()) => (StatusCode::ACCEPTED, Json(json!({ "accepted": true }))).into_response(),
        Err(e) => command_rejection(e),
    }
}

async fn stream_events(
    State(app): State<Arc<App>>,
    Path(id): Path<String>,
    Query(q): Query<FromQuery>,
    ws: WebSocketUpgrade,
) -> Response {
    let Some(handle) = app.get(&id) else { return not_found(&id) };
    ws.on_upgrade(move |socket| connection(socket, handle, q.from))
}

async fn send(socket: &mut WebSocket, frame: &Frame) -> bool {
    socket.send(Message::Text(frame.to_text().into())).await.is_ok()
}

async fn connection(mut socket: WebSocket, handle: SessionHandle, from: u64) {
    let mut sub = handle.subscribe(from);
    for record in &sub.backfill {
        if !send(&mut socket, &Frame::step(record)).await {
            return;
        }
    }
    if !send(&mut socket, &Frame::status(&sub.status)).await {
        return;
    }
    loop {
        tokio::select! {
            frame = sub.live.recv() => match frame {
                Ok(frame) => {
                    if !send(&mut socket, &frame).await {
                        return;
                    }
                }
                Err(RecvError::Lagged(n)) => {
                    let _ = send(&mut socket, &Frame::error(format!("fell {n} frames behind; reconnect with ?from="))).await;
                    return;
                }
                Err(RecvError::Closed) => return,
            },
            inbound = socket.recv() => match inbound {
                Some(Ok(Message::Text(text))) => {
                    let reply = match parse_inbound(text.as_str()) {
                        Err(e) => Frame::rejected(e.to_string()),
                        Ok(command) => match handle.command(command.clone()).await {
                            Ok(()) => Frame::ack(&command),
                            Err(e) => Frame::rejected(e.to_string()),
                        },
                    };
                    if !send(&mut socket, &reply).await {
                        return;
                    }
                }
                Some(Ok(Message::Binary(_))) => {
                    if !send(&mut socket, &Frame::rejected("binary frames are not supported")).await {
                        return;
                    }
                }
                Some(Ok(Message::Close(_))) | None | Some(Err(_)) => return,
                Some(Ok(_)) => {}
            },
        }
    }
}
