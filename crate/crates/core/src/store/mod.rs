//! Durable storage: an append-only transaction log plus derived in-memory
//! indexes.
//!
//! All mutations are serialized through `&mut Store`; callers that share a
//! store across threads wrap it in [`SharedStore`]. A mutation is checked
//! against the current state, appended (and fsynced) to the log, then applied,
//! so readers never observe a partially applied entry.

mod filter;
mod log;
mod state;

use std::collections::HashMap;
use std::path::Path;
use std::sync::{Arc, Mutex, RwLock, RwLockReadGuard, RwLockWriteGuard};

pub use filter::AnnotationFilter;
pub use log::{read_log, LogContents, LogEntry, LogOp, Mutation};
pub use state::StoreState;

use log::LogBackend;

use crate::error::{Error, Result};
use crate::model::{AnnotationId, AnnotationRecord, AnnotatorProfile, DocumentRecord, Timestamp};

/// Source of the current UTC time in seconds.
pub type Clock = Arc<dyn Fn() -> Timestamp + Send + Sync>;

pub fn system_clock() -> Clock {
    Arc::new(|| chrono::Utc::now().timestamp())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StoreConfig {
    /// Seconds of inactivity after which an open session is closed at its
    /// last event time.
    pub session_timeout: Timestamp,
}

impl Default for StoreConfig {
    fn default() -> Self {
        StoreConfig {
            session_timeout: 3600,
        }
    }
}

pub struct Store {
    state: StoreState,
    log: LogBackend,
    clock: Clock,
    config: StoreConfig,
}

impl std::fmt::Debug for Store {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Store")
            .field("system_id", &self.state.system_id())
            .field("head", &self.state.head())
            .field("log", &self.log.path())
            .finish()
    }
}

impl Store {
    /// A store whose log lives only in memory.
    pub fn in_memory(system_id: impl Into<String>) -> Self {
        Store {
            state: StoreState::new(system_id),
            log: LogBackend::Memory(Vec::new()),
            clock: system_clock(),
            config: StoreConfig::default(),
        }
    }

    /// Opens (or creates) a file-backed store and replays its log.
    pub fn open(path: &Path, system_id: &str) -> Result<Self> {
        let contents = read_log(path)?;
        let state = StoreState::replay(system_id, &contents.entries)?;
        let log = LogBackend::open_file(path, contents.torn_at)?;
        Ok(Store {
            state,
            log,
            clock: system_clock(),
            config: StoreConfig::default(),
        })
    }

    pub fn with_clock(mut self, clock: Clock) -> Self {
        self.clock = clock;
        self
    }

    pub fn with_config(mut self, config: StoreConfig) -> Self {
        self.config = config;
        self
    }

    pub fn config(&self) -> StoreConfig {
        self.config
    }

    pub fn now(&self) -> Timestamp {
        (self.clock)()
    }

    pub fn system_id(&self) -> &str {
        self.state.system_id()
    }

    pub fn state(&self) -> &StoreState {
        &self.state
    }

    pub fn log_path(&self) -> Option<&Path> {
        self.log.path()
    }

    /// Every entry written so far, in sequence order.
    pub fn entries(&self) -> Result<Vec<LogEntry>> {
        self.log.entries()
    }

    /// Checks, persists and applies one mutation. Returns its sequence number.
    pub fn commit(&mut self, mutation: Mutation) -> Result<u64> {
        self.state.check(&mutation)?;
        let seq = self.state.head() + 1;
        let entry = LogEntry::encode(seq, self.now(), &mutation)?;
        self.log.append(&entry)?;
        self.state.apply_checked(seq, mutation);
        Ok(seq)
    }

    /// Replays this store's own log and compares the result to the live state.
    pub fn replay_check(&self) -> Result<bool> {
        let entries = self.entries()?;
        let replayed = StoreState::replay(self.system_id(), &entries)?;
        Ok(replayed == self.state)
    }

    pub fn ingest_document(&mut self, mut doc: DocumentRecord) -> Result<String> {
        if doc.available_at <= 0 {
            doc.available_at = self.now();
        }
        let document_ref = doc.document_ref.clone();
        self.commit(Mutation::PutDocument(doc))?;
        Ok(document_ref)
    }

    pub fn get_document(&self, document_ref: &str) -> Result<&DocumentRecord> {
        self.state
            .document(document_ref)
            .ok_or_else(|| Error::UnknownDocument(document_ref.to_string()))
    }

    pub fn put_user(&mut self, profile: AnnotatorProfile) -> Result<String> {
        let annotator_ref = profile.annotator_ref.clone();
        self.commit(Mutation::PutUser(profile))?;
        Ok(annotator_ref)
    }

    pub fn get_user(&self, annotator_ref: &str) -> Result<&AnnotatorProfile> {
        self.state
            .user(annotator_ref)
            .ok_or_else(|| Error::UnknownUser(annotator_ref.to_string()))
    }

    pub fn list_users(&self) -> Vec<&AnnotatorProfile> {
        self.state.list_users()
    }

    /// Stores a validated annotation and records `annotation_created` in its
    /// session.
    pub fn append_annotation(&mut self, candidate: AnnotationRecord) -> Result<AnnotationId> {
        let id = candidate.id();
        self.commit(Mutation::PutAnnotation(candidate))?;
        Ok(id)
    }

    pub fn get_annotation(&self, id: &AnnotationId) -> Result<&AnnotationRecord> {
        self.state
            .annotation(id)
            .ok_or_else(|| Error::UnknownRef(id.to_string()))
    }

    /// Annotations matching `filter` that `as_user` may read, ordered by
    /// `created_at`, then `context_ref`.
    pub fn query_annotations(
        &self,
        filter: &AnnotationFilter,
        as_user: &str,
    ) -> Result<Vec<AnnotationRecord>> {
        if self.state.user(as_user).is_none() {
            return Err(Error::UnknownUser(as_user.to_string()));
        }
        Ok(self.visible_annotations(filter, Some(as_user)))
    }

    /// Like [`Store::query_annotations`] but for an optional (possibly
    /// anonymous) reader and without checking that the reader exists.
    pub fn visible_annotations(
        &self,
        filter: &AnnotationFilter,
        viewer: Option<&str>,
    ) -> Vec<AnnotationRecord> {
        let candidates: Box<dyn Iterator<Item = &AnnotationRecord>> = match &filter.document_ref {
            Some(d) => Box::new(self.state.annotations_on(d)),
            None => Box::new(self.state.annotations()),
        };
        let mut out: Vec<AnnotationRecord> = candidates
            .filter(|a| filter.matches(a) && self.state.is_visible(a, viewer))
            .cloned()
            .collect();
        sort_annotations(&mut out);
        out
    }

    pub fn create_group(&mut self, group_id: &str) -> Result<()> {
        self.commit(Mutation::PutGroup {
            group_id: group_id.to_string(),
        })?;
        Ok(())
    }

    pub fn add_group_member(&mut self, group_id: &str, annotator_ref: &str) -> Result<()> {
        self.commit(Mutation::AddGroupMember {
            group_id: group_id.to_string(),
            annotator_ref: annotator_ref.to_string(),
        })?;
        Ok(())
    }

    /// Rebuilds the postings of one document or annotation.
    pub fn index_upsert(&mut self, target: IndexTarget) -> Result<()> {
        match target {
            IndexTarget::Document(r) => {
                let doc = self
                    .state
                    .document(&r)
                    .cloned()
                    .ok_or(Error::UnknownRef(r))?;
                self.state.index_mut().upsert_document(&doc);
            }
            IndexTarget::Annotation(id) => {
                let ann = self.get_annotation(&id)?.clone();
                self.state.index_mut().upsert_annotation(&ann);
            }
        }
        Ok(())
    }
}

/// What [`Store::index_upsert`] re-indexes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum IndexTarget {
    Document(String),
    Annotation(AnnotationId),
}

pub(crate) fn sort_annotations(list: &mut [AnnotationRecord]) {
    list.sort_by(|a, b| {
        a.created_at
            .cmp(&b.created_at)
            .then_with(|| a.context_ref.cmp(&b.context_ref))
            .then_with(|| a.origin_system.cmp(&b.origin_system))
    });
}

/// A store shared between threads: one writer, many readers.
#[derive(Clone, Debug)]
pub struct SharedStore {
    inner: Arc<RwLock<Store>>,
    peer_locks: Arc<Mutex<HashMap<String, Arc<Mutex<()>>>>>,
}

impl SharedStore {
    pub fn new(store: Store) -> Self {
        SharedStore {
            inner: Arc::new(RwLock::new(store)),
            peer_locks: Arc::default(),
        }
    }

    /// Lock serializing exchanges with one peer.
    pub fn peer_lock(&self, peer_id: &str) -> Arc<Mutex<()>> {
        let mut locks = self.peer_locks.lock().unwrap_or_else(|p| p.into_inner());
        locks.entry(peer_id.to_string()).or_default().clone()
    }

    pub fn read(&self) -> RwLockReadGuard<'_, Store> {
        self.inner
            .read()
            .unwrap_or_else(|poisoned| poisoned.into_inner())
    }

    pub fn write(&self) -> RwLockWriteGuard<'_, Store> {
        self.inner
            .write()
            .unwrap_or_else(|poisoned| poisoned.into_inner())
    }
}
