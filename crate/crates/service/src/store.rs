//! Live sessions, idempotency keys, and on-disk checkpoints.
//!
//! A checkpoint holds the creation request plus the label transcript.
//! Restoring replays the transcript through a fresh session, which is
//! deterministic, so the restored state matches the one that was saved.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use viewclean::catalog::TaskCache;
use viewclean::classifier::Label;
use viewclean::engine::{drive, Session};
use viewclean::labeler::TranscriptLabeler;
use viewclean::PairKey;

use crate::api::{CreateSession, SessionDescriptor};
use crate::error::ApiError;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Checkpoint {
    pub id: String,
    pub created_at: u64,
    pub request: CreateSession,
    pub transcript: Vec<(PairKey, Label)>,
}

#[derive(Debug)]
pub struct Entry {
    pub id: String,
    pub created_at: u64,
    pub request: CreateSession,
    pub session: Session,
}

impl Entry {
    pub fn descriptor(&self) -> SessionDescriptor {
        SessionDescriptor {
            id: self.id.clone(),
            dataset: self.request.dataset.clone(),
            views: self.request.views.clone(),
            aggregation: self.request.aggregation,
            config: self.session.config().clone(),
            created_at: self.created_at,
            summary: self.session.summary(),
        }
    }

    fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            id: self.id.clone(),
            created_at: self.created_at,
            request: self.request.clone(),
            transcript: self.session.transcript(),
        }
    }
}

pub type Handle = Arc<Mutex<Entry>>;

pub struct Store {
    cache: TaskCache,
    checkpoints: Option<PathBuf>,
    sessions: RwLock<HashMap<String, Handle>>,
    idempotency: Mutex<HashMap<String, String>>,
}

impl Store {
    pub fn new(cache: TaskCache, checkpoints: Option<PathBuf>) -> Store {
        Store {
            cache,
            checkpoints,
            sessions: RwLock::new(HashMap::new()),
            idempotency: Mutex::new(HashMap::new()),
        }
    }

    pub fn get(&self, id: &str) -> Result<Handle, ApiError> {
        self.sessions
            .read()
            .expect("session map poisoned")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::UnknownSession(id.to_string()))
    }

    fn start(&self, request: &CreateSession) -> Result<Session, ApiError> {
        if request.views.is_empty() {
            return Err(ApiError::BadRequest("`views` must name at least one view".into()));
        }
        let prepared = self
            .cache
            .prepared(&request.dataset, &request.views, request.aggregation)?;
        Ok(Session::start(prepared, request.config.clone())?)
    }

    /// Creates a session, or returns the one already made under the same
    /// idempotency key. Blocking: prepares the task on first use.
    pub fn create(&self, request: CreateSession) -> Result<SessionDescriptor, ApiError> {
        if let Some(key) = &request.idempotency_key {
            let existing = self.idempotency.lock().expect("key map poisoned").get(key).cloned();
            if let Some(id) = existing {
                return Ok(self.get(&id)?.lock().expect("session poisoned").descriptor());
            }
        }
        let session = self.start(&request)?;
        let entry = Entry {
            id: uuid::Uuid::new_v4().simple().to_string(),
            created_at: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
            request,
            session,
        };
        // A concurrent create with the same key may have won meanwhile.
        if let Some(key) = &entry.request.idempotency_key {
            let mut keys = self.idempotency.lock().expect("key map poisoned");
            if let Some(id) = keys.get(key).cloned() {
                drop(keys);
                return Ok(self.get(&id)?.lock().expect("session poisoned").descriptor());
            }
            keys.insert(key.clone(), entry.id.clone());
        }
        self.save(&entry)?;
        let descriptor = entry.descriptor();
        self.sessions
            .write()
            .expect("session map poisoned")
            .insert(entry.id.clone(), Arc::new(Mutex::new(entry)));
        Ok(descriptor)
    }

    pub fn save(&self, entry: &Entry) -> Result<(), ApiError> {
        let Some(dir) = &self.checkpoints else {
            return Ok(());
        };
        write_atomic(dir, &entry.id, &entry.checkpoint())
            .map_err(|e| ApiError::Internal(format!("checkpoint {}: {e}", entry.id)))
    }

    /// Rebuilds every checkpointed session. Returns how many were restored.
    pub fn restore(&self) -> Result<usize, ApiError> {
        let Some(dir) = &self.checkpoints else {
            return Ok(0);
        };
        let read_dir = match std::fs::read_dir(dir) {
            Ok(r) => r,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(0),
            Err(e) => return Err(ApiError::Internal(format!("{}: {e}", dir.display()))),
        };
        let mut paths: Vec<PathBuf> = read_dir
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect();
        paths.sort();
        let mut restored = 0;
        for path in paths {
            let cp = read_checkpoint(&path)?;
            let entry = self.replay(cp)?;
            if let Some(key) = &entry.request.idempotency_key {
                self.idempotency
                    .lock()
                    .expect("key map poisoned")
                    .insert(key.clone(), entry.id.clone());
            }
            self.sessions
                .write()
                .expect("session map poisoned")
                .insert(entry.id.clone(), Arc::new(Mutex::new(entry)));
            restored += 1;
        }
        Ok(restored)
    }

    fn replay(&self, cp: Checkpoint) -> Result<Entry, ApiError> {
        let mut session = self.start(&cp.request)?;
        let mut labeler = TranscriptLabeler::new(cp.transcript.iter().copied());
        // The transcript ends where the outstanding batch begins, so the
        // replay stops there with a labeler error.
        match drive(&mut session, &mut labeler) {
            Ok(()) | Err(viewclean::Error::Labeler(_)) => {}
            Err(e) => return Err(e.into()),
        }
        if session.transcript() != cp.transcript {
            return Err(ApiError::Internal(format!(
                "checkpoint {} did not replay: {} of {} labels consumed",
                cp.id,
                session.labels_used(),
                cp.transcript.len()
            )));
        }
        Ok(Entry {
            id: cp.id,
            created_at: cp.created_at,
            request: cp.request,
            session,
        })
    }
}

pub fn read_checkpoint(path: &Path) -> Result<Checkpoint, ApiError> {
    let text = std::fs::read_to_string(path).map_err(|e| ApiError::Internal(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| ApiError::Internal(format!("{}: {e}", path.display())))
}

fn write_atomic(dir: &Path, id: &str, cp: &Checkpoint) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    let tmp = dir.join(format!("{id}.json.tmp"));
    let bytes = serde_json::to_vec_pretty(cp).map_err(std::io::Error::other)?;
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(tmp, dir.join(format!("{id}.json")))
}
