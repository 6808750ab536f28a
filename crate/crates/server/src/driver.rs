//! One thread per session. Commands from every transport go through a single
//! queue; records fan out through a broadcast channel.

use std::sync::mpsc;
use std::sync::{Arc, Mutex, MutexGuard};
use std::thread;

use cola_core::orchestrator::{ArchivedBranch, Command, CommandError, Session, SessionState, SessionStatus, StepRecord};
use tokio::sync::{broadcast, oneshot};

use crate::wire::Frame;

const FANOUT_CAPACITY: usize = 1024;

/// What every reader sees. Updated and broadcast under one lock so a
/// subscriber that snapshots the log never misses or repeats a frame.
pub struct Published {
    pub log: Vec<StepRecord>,
    pub archived: Vec<ArchivedBranch>,
    pub status: SessionStatus,
    pub state: SessionState,
    frames: broadcast::Sender<Frame>,
}

enum Request {
    Command(Command, oneshot::Sender<Result<(), CommandError>>),
    Stop,
}

#[derive(Clone)]
pub struct SessionHandle {
    id: String,
    requests: mpsc::Sender<Request>,
    published: Arc<Mutex<Published>>,
}

/// Backfill plus a live tail that starts right after it.
pub struct Subscription {
    pub backfill: Vec<StepRecord>,
    pub status: SessionStatus,
    pub live: broadcast::Receiver<Frame>,
}

impl SessionHandle {
    /// Takes ownership of `session` and starts driving it.
    pub fn spawn(session: Session) -> Self {
        let (frames, _) = broadcast::channel(FANOUT_CAPACITY);
        let published = Arc::new(Mutex::new(Published {
            log: session.log().to_vec(),
            archived: session.archived().to_vec(),
            status: session.status(),
            state: session.state().clone(),
            frames,
        }));
        let (requests, rx) = mpsc::channel();
        let id = session.id().to_string();
        let shared = published.clone();
        thread::Builder::new()
            .name(format!("session-{id}"))
            .spawn(move || drive(session, rx, shared))
            .expect("spawn session thread");
        Self { id, requests, published }
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn published(&self) -> MutexGuard<'_, Published> {
        self.published.lock().expect("session lock")
    }

    pub fn subscribe(&self, from: u64) -> Subscription {
        let p = self.published();
        Subscription {
            backfill: p.log.iter().skip(from as usize).cloned().collect(),
            status: p.status.clone(),
            live: p.frames.subscribe(),
        }
    }

    /// Queues a command and waits for the session's verdict.
    pub async fn command(&self, command: Command) -> Result<(), CommandError> {
        let (tx, rx) = oneshot::channel();
        self.requests
            .send(Request::Command(command, tx))
            .map_err(|_| CommandError::NotAcceptable("session is shut down".into()))?;
        rx.await.unwrap_or_else(|_| Err(CommandError::NotAcceptable("session is shut down".into())))
    }

    /// Blocking form of [`SessionHandle::command`] for non-async callers.
    pub fn command_blocking(&self, command: Command) -> Result<(), CommandError> {
        let (tx, rx) = oneshot::channel();
        self.requests
            .send(Request::Command(command, tx))
            .map_err(|_| CommandError::NotAcceptable("session is shut down".into()))?;
        rx.blocking_recv().unwrap_or_else(|_| Err(CommandError::NotAcceptable("session is shut down".into())))
    }

    pub fn stop(&self) {
        let _ = self.requests.send(Request::Stop);
    }
}

fn refresh(p: &mut Published, session: &Session) {
    p.status = session.status();
    p.state = session.state().clone();
    let _ = p.frames.send(Frame::status(&p.status));
}

fn drive(mut session: Session, rx: mpsc::Receiver<Request>, published: Arc<Mutex<Published>>) {
    let lock = || published.lock().expect("session lock");
    let mut stalled = false;
    loop {
        let next = if session.can_advance() && !stalled {
            match rx.try_recv() {
                Ok(r) => Some(r),
                Err(mpsc::TryRecvError::Empty) => None,
                Err(mpsc::TryRecvError::Disconnected) => return,
            }
        } else {
            match rx.recv() {
                Ok(r) => Some(r),
                Err(_) => return,
            }
        };
        match next {
            Some(Request::Stop) => return,
            Some(Request::Command(command, reply)) => {
                let before = session.archived().len();
                let result = session.command(command.clone());
                if result.is_ok() {
                    stalled = false;
                }
                {
                    let mut p = lock();
                    if let (Ok(()), Command::Rollback { step }) = (&result, &command) {
                        p.log = session.log().to_vec();
                        p.archived = session.archived().to_vec();
                        let branch = session.archived()[before..]
                            .last()
                            .cloned()
                            .unwrap_or(ArchivedBranch { rollback_to: *step, records: Vec::new() });
                        let _ = p.frames.send(Frame::rollback(*step, &branch));
                    }
                    refresh(&mut p, &session);
                }
                let _ = reply.send(result);
            }
            None => {
                let outcome = session.advance();
                if session.phase().is_terminal() && !session.memories_committed() {
                    if let Err(e) = session.commit_memories() {
                        tracing::warn!(session = session.id(), error = %e, "committing memories failed");
                    }
                }
                let mut p = lock();
                match outcome {
                    Ok(record) => {
                        p.log.push(record.clone());
                        let _ = p.frames.send(Frame::step(&record));
                    }
                    Err(e) => {
                        tracing::info!(session = session.id(), error = %e, "session stopped");
                        let _ = p.frames.send(Frame::error(e.to_string()));
                        // An error that leaves the session runnable would spin.
                        stalled = session.can_advance();
                    }
                }
                refresh(&mut p, &session);
            }
        }
    }
}
