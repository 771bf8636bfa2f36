//! Session registry with optional append-only JSON-lines persistence.
//!
//! Each session is one file `<id>.jsonl`: a header record followed by one
//! record per answer. Loading replays the answers against a fresh session.

use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use serde::{Deserialize, Serialize};

use crate::error::ServiceError;
use crate::session::{now_millis, AnswerRecord, AnswerSummary, CatalogItem, NextQuery, Session, SessionConfig, SessionHeader, SessionSummary};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "lowercase")]
pub enum LogRecord {
    Header(SessionHeader),
    Answer(AnswerRecord),
}

/// Reads a session log into its header and answers.
pub fn read_log(path: &Path) -> Result<(SessionHeader, Vec<AnswerRecord>), ServiceError> {
    let storage = |e: String| ServiceError::Storage(format!("{}: {e}", path.display()));
    let file = File::open(path).map_err(|e| storage(e.to_string()))?;
    let mut header = None;
    let mut answers = Vec::new();
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| storage(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str(&line).map_err(|e| storage(format!("line {}: {e}", n + 1)))? {
            LogRecord::Header(h) if header.is_none() => header = Some(h),
            LogRecord::Header(_) => return Err(storage(format!("line {}: second header", n + 1))),
            LogRecord::Answer(a) if header.is_some() => answers.push(a),
            LogRecord::Answer(_) => return Err(storage("answer before header".into())),
        }
    }
    Ok((header.ok_or_else(|| storage("empty log".into()))?, answers))
}

fn append(path: &Path, record: &LogRecord) -> Result<(), ServiceError> {
    let mut line = serde_json::to_string(record).map_err(|e| ServiceError::Internal(e.to_string()))?;
    line.push('\n');
    let mut f = OpenOptions::new().create(true).append(true).open(path).map_err(|e| ServiceError::Storage(format!("{}: {e}", path.display())))?;
    f.write_all(line.as_bytes()).and_then(|_| f.flush()).map_err(|e| ServiceError::Storage(format!("{}: {e}", path.display())))
}

/// A session plus a read snapshot that never waits on the writer.
pub struct SessionHandle {
    session: Mutex<Session>,
    snapshot: RwLock<Arc<SessionSummary>>,
    log: Option<PathBuf>,
}

impl SessionHandle {
    fn new(session: Session, log: Option<PathBuf>) -> Self {
        let snapshot = RwLock::new(Arc::new(session.summary()));
        Self { session: Mutex::new(session), snapshot, log }
    }

    fn publish(&self, session: &Session) {
        *self.snapshot.write().unwrap_or_else(|e| e.into_inner()) = Arc::new(session.summary());
    }

    pub fn summary(&self) -> Arc<SessionSummary> {
        self.snapshot.read().unwrap_or_else(|e| e.into_inner()).clone()
    }

    /// Serves the next query. Blocks while another mutation of this session runs.
    pub fn next_query(&self) -> Result<NextQuery, ServiceError> {
        let mut s = self.session.lock().unwrap_or_else(|e| e.into_inner());
        let out = s.next_query()?;
        self.publish(&s);
        Ok(out)
    }

    /// Logs the answer, then applies it.
    pub fn submit_answer(&self, query_id: &str, winner: &str) -> Result<AnswerSummary, ServiceError> {
        let mut s = self.session.lock().unwrap_or_else(|e| e.into_inner());
        let (pair, record) = s.prepare_answer(query_id, winner)?;
        let mut next = s.clone();
        let summary = next.apply_answer(pair, record.clone())?;
        if let Some(path) = &self.log {
            append(path, &LogRecord::Answer(record))?;
        }
        *s = next;
        self.publish(&s);
        Ok(summary)
    }

    /// Runs `f` on the live session.
    pub fn with_session<T>(&self, f: impl FnOnce(&Session) -> T) -> T {
        f(&self.session.lock().unwrap_or_else(|e| e.into_inner()))
    }
}

#[derive(Default)]
pub struct SessionStore {
    dir: Option<PathBuf>,
    sessions: RwLock<HashMap<String, Arc<SessionHandle>>>,
}

impl SessionStore {
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// Store persisting under `dir`, replaying every `*.jsonl` log found there.
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self, ServiceError> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(|e| ServiceError::Storage(format!("{}: {e}", dir.display())))?;
        let mut sessions = HashMap::new();
        let mut paths: Vec<PathBuf> = fs::read_dir(&dir)
            .map_err(|e| ServiceError::Storage(format!("{}: {e}", dir.display())))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
            .collect();
        paths.sort();
        for path in paths {
            let (header, answers) = read_log(&path)?;
            let session = Session::replay(header, &answers)?;
            tracing::info!(session = session.id(), answers = answers.len(), "restored session");
            sessions.insert(session.id().to_owned(), Arc::new(SessionHandle::new(session, Some(path))));
        }
        Ok(Self { dir: Some(dir), sessions: RwLock::new(sessions) })
    }

    pub fn dir(&self) -> Option<&Path> {
        self.dir.as_deref()
    }

    pub fn len(&self) -> usize {
        self.sessions.read().unwrap_or_else(|e| e.into_inner()).len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn create(&self, items: Vec<CatalogItem>, config: SessionConfig) -> Result<Arc<SessionHandle>, ServiceError> {
        let id = uuid::Uuid::new_v4().simple().to_string();
        let session = Session::create(id.clone(), now_millis(), items, config)?;
        let log = match &self.dir {
            Some(dir) => {
                let path = dir.join(format!("{id}.jsonl"));
                append(&path, &LogRecord::Header(session.header().clone()))?;
                Some(path)
            }
            None => None,
        };
        let handle = Arc::new(SessionHandle::new(session, log));
        self.sessions.write().unwrap_or_else(|e| e.into_inner()).insert(id, handle.clone());
        Ok(handle)
    }

    pub fn get(&self, id: &str) -> Result<Arc<SessionHandle>, ServiceError> {
        self.sessions.read().unwrap_or_else(|e| e.into_inner()).get(id).cloned().ok_or_else(|| ServiceError::NotFound(id.to_owned()))
    }
}
