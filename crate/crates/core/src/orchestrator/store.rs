use std::fs::{self, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::{ArchivedBranch, EngineError, SessionState, StepRecord};

/// `meta.json`: what is needed to rebuild a session besides its logs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionMeta {
    pub id: String,
    pub scenario: Option<PathBuf>,
    pub playbook: Option<PathBuf>,
    pub memories_committed: bool,
    /// Live state, including anything commands changed since the last step.
    pub state: SessionState,
}

/// Everything read back from a session directory.
#[derive(Debug, Clone)]
pub struct StoredSession {
    pub meta: SessionMeta,
    pub events: Vec<StepRecord>,
    pub archived: Vec<ArchivedBranch>,
}

/// One session's directory: `events.jsonl`, `archived.jsonl`, `meta.json`.
#[derive(Debug, Clone)]
pub struct SessionStore {
    dir: PathBuf,
    scenario: Option<PathBuf>,
    playbook: Option<PathBuf>,
}

fn io_err(e: impl std::fmt::Display) -> EngineError {
    EngineError::Persistence(e.to_string())
}

fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, EngineError> {
    let file = match fs::File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(io_err(e)),
    };
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err)?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str(&line) {
            Ok(v) => out.push(v),
            // A torn final line from a crash mid-write is dropped.
            Err(e) if e.is_eof() => break,
            Err(e) => return Err(EngineError::Persistence(format!("{}:{}: {e}", path.display(), i + 1))),
        }
    }
    Ok(out)
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), EngineError> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes).map_err(io_err)?;
    fs::rename(&tmp, path).map_err(io_err)
}

impl SessionStore {
    pub fn create(
        sessions_dir: &Path,
        id: &str,
        scenario: Option<PathBuf>,
        playbook: Option<PathBuf>,
    ) -> Result<Self, EngineError> {
        let dir = sessions_dir.join(id);
        fs::create_dir_all(&dir).map_err(io_err)?;
        Ok(Self { dir, scenario, playbook })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn append_event(&self, record: &StepRecord) -> Result<(), EngineError> {
        self.append_line("events.jsonl", record)
    }

    pub fn rewrite_events(&self, records: &[StepRecord]) -> Result<(), EngineError> {
        let mut bytes = Vec::new();
        for r in records {
            serde_json::to_writer(&mut bytes, r).map_err(io_err)?;
            bytes.push(b'\n');
        }
        write_atomic(&self.dir.join("events.jsonl"), &bytes)
    }

    pub fn append_archived(&self, branch: &ArchivedBranch) -> Result<(), EngineError> {
        self.append_line("archived.jsonl", branch)
    }

    pub fn write_meta(&self, state: &SessionState, memories_committed: bool) -> Result<(), EngineError> {
        let meta = SessionMeta {
            id: state.id.clone(),
            scenario: self.scenario.clone(),
            playbook: self.playbook.clone(),
            memories_committed,
            state: state.clone(),
        };
        let bytes = serde_json::to_vec_pretty(&meta).map_err(io_err)?;
        write_atomic(&self.dir.join("meta.json"), &bytes)
    }

    fn append_line<T: Serialize>(&self, file: &str, value: &T) -> Result<(), EngineError> {
        let mut line = serde_json::to_vec(value).map_err(io_err)?;
        line.push(b'\n');
        let mut f = OpenOptions::new().create(true).append(true).open(self.dir.join(file)).map_err(io_err)?;
        f.write_all(&line).map_err(io_err)?;
        f.flush().map_err(io_err)
    }

    /// Reads a session directory back.
    pub fn load(dir: &Path) -> Result<(Self, StoredSession), EngineError> {
        let text = fs::read_to_string(dir.join("meta.json")).map_err(io_err)?;
        let meta: SessionMeta =
            serde_json::from_str(&text).map_err(|e| EngineError::Persistence(format!("meta.json: {e}")))?;
        let events = read_jsonl(&dir.join("events.jsonl"))?;
        let archived = read_jsonl(&dir.join("archived.jsonl"))?;
        let store = Self { dir: dir.to_path_buf(), scenario: meta.scenario.clone(), playbook: meta.playbook.clone() };
        Ok((store, StoredSession { meta, events, archived }))
    }

    /// Session directories under `sessions_dir`, sorted by name.
    pub fn list(sessions_dir: &Path) -> Result<Vec<PathBuf>, EngineError> {
        let mut dirs = Vec::new();
        let entries = match fs::read_dir(sessions_dir) {
            Ok(e) => e,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(dirs),
            Err(e) => return Err(io_err(e)),
        };
        for entry in entries {
            let path = entry.map_err(io_err)?.path();
            if path.join("meta.json").is_file() {
                dirs.push(path);
            }
        }
        dirs.sort();
        Ok(dirs)
    }
}
