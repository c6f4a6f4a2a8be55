//! In-memory state rebuilt from the log.
//!
//! Every change goes through [`StoreState::check`] followed by
//! [`StoreState::apply_checked`]; replay uses the same pair, so a replayed log
//! reproduces the live state exactly.

use std::collections::{BTreeMap, BTreeSet};

use super::log::{LogEntry, Mutation};
use crate::error::{Error, Result};
use crate::federation::{ExportReceipt, FederationPeer};
use crate::model::{
    validate_annotation, validate_federated, AnnotationId, AnnotationRecord, AnnotatorProfile,
    DocumentRecord, ExplicitProfile, SessionContext, SessionEvent, SessionEventKind, Timestamp,
    Visibility,
};
use crate::search::PostingIndex;
use crate::synthesizer::{Credential, ImplicitProfile};

#[derive(Debug, Clone, PartialEq)]
pub struct StoreState {
    system_id: String,
    head: u64,
    users: BTreeMap<String, AnnotatorProfile>,
    credentials: BTreeMap<String, Credential>,
    documents: BTreeMap<String, DocumentRecord>,
    annotations: BTreeMap<AnnotationId, AnnotationRecord>,
    by_document: BTreeMap<String, BTreeSet<AnnotationId>>,
    by_user: BTreeMap<String, BTreeSet<AnnotationId>>,
    /// (seq of the put_annotation entry, identity), ascending.
    annotation_seqs: Vec<(u64, AnnotationId)>,
    sessions: BTreeMap<String, SessionContext>,
    sessions_by_user: BTreeMap<String, Vec<String>>,
    open_sessions: BTreeMap<String, String>,
    groups: BTreeMap<String, BTreeSet<String>>,
    peers: BTreeMap<String, FederationPeer>,
    exports: Vec<ExportReceipt>,
    profiles: BTreeMap<String, ImplicitProfile>,
    index: PostingIndex,
}

impl StoreState {
    pub fn new(system_id: impl Into<String>) -> Self {
        StoreState {
            system_id: system_id.into(),
            head: 0,
            users: BTreeMap::new(),
            credentials: BTreeMap::new(),
            documents: BTreeMap::new(),
            annotations: BTreeMap::new(),
            by_document: BTreeMap::new(),
            by_user: BTreeMap::new(),
            annotation_seqs: Vec::new(),
            sessions: BTreeMap::new(),
            sessions_by_user: BTreeMap::new(),
            open_sessions: BTreeMap::new(),
            groups: BTreeMap::new(),
            peers: BTreeMap::new(),
            exports: Vec::new(),
            profiles: BTreeMap::new(),
            index: PostingIndex::new(),
        }
    }

    /// Rebuilds state from entries in sequence order.
    pub fn replay<'a, I>(system_id: &str, entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = &'a LogEntry>,
    {
        let mut state = StoreState::new(system_id);
        for entry in entries {
            let expected = state.head + 1;
            if entry.seq != expected {
                return Err(Error::SequenceGap {
                    expected,
                    found: entry.seq,
                });
            }
            let mutation = entry.decode()?;
            state.check(&mutation).map_err(|e| Error::CorruptEntry {
                seq: entry.seq,
                reason: e.to_string(),
            })?;
            state.apply_checked(entry.seq, mutation);
        }
        Ok(state)
    }

    pub fn system_id(&self) -> &str {
        &self.system_id
    }

    /// Sequence number of the last applied entry.
    pub fn head(&self) -> u64 {
        self.head
    }

    pub fn user(&self, annotator_ref: &str) -> Option<&AnnotatorProfile> {
        self.users.get(annotator_ref)
    }

    /// Users ordered by `created_at`, then `annotator_ref`.
    pub fn list_users(&self) -> Vec<&AnnotatorProfile> {
        let mut users: Vec<_> = self.users.values().collect();
        users.sort_by(|a, b| {
            a.created_at
                .cmp(&b.created_at)
                .then_with(|| a.annotator_ref.cmp(&b.annotator_ref))
        });
        users
    }

    pub fn credential(&self, annotator_ref: &str) -> Option<&Credential> {
        self.credentials.get(annotator_ref)
    }

    pub fn document(&self, document_ref: &str) -> Option<&DocumentRecord> {
        self.documents.get(document_ref)
    }

    pub fn documents(&self) -> impl Iterator<Item = &DocumentRecord> {
        self.documents.values()
    }

    pub fn annotation(&self, id: &AnnotationId) -> Option<&AnnotationRecord> {
        self.annotations.get(id)
    }

    pub fn annotations(&self) -> impl Iterator<Item = &AnnotationRecord> {
        self.annotations.values()
    }

    pub fn annotation_count(&self) -> usize {
        self.annotations.len()
    }

    pub fn annotations_on(&self, document_ref: &str) -> impl Iterator<Item = &AnnotationRecord> {
        self.by_document
            .get(document_ref)
            .into_iter()
            .flatten()
            .filter_map(|id| self.annotations.get(id))
    }

    pub fn annotations_by(&self, annotator_ref: &str) -> impl Iterator<Item = &AnnotationRecord> {
        self.by_user
            .get(annotator_ref)
            .into_iter()
            .flatten()
            .filter_map(|id| self.annotations.get(id))
    }

    /// Annotations whose put entry has `from < seq <= to`, in log order.
    pub fn annotations_in_seq_range(
        &self,
        from: u64,
        to: u64,
    ) -> impl Iterator<Item = (u64, &AnnotationRecord)> {
        let start = self.annotation_seqs.partition_point(|(s, _)| *s <= from);
        self.annotation_seqs[start..]
            .iter()
            .take_while(move |(s, _)| *s <= to)
            .filter_map(|(s, id)| self.annotations.get(id).map(|a| (*s, a)))
    }

    pub fn session(&self, session_ref: &str) -> Option<&SessionContext> {
        self.sessions.get(session_ref)
    }

    pub fn sessions(&self) -> impl Iterator<Item = &SessionContext> {
        self.sessions.values()
    }

    /// A user's sessions in the order they were opened.
    pub fn sessions_of(&self, annotator_ref: &str) -> impl Iterator<Item = &SessionContext> {
        self.sessions_by_user
            .get(annotator_ref)
            .into_iter()
            .flatten()
            .filter_map(|s| self.sessions.get(s))
    }

    pub fn open_session_of(&self, annotator_ref: &str) -> Option<&SessionContext> {
        self.open_sessions
            .get(annotator_ref)
            .and_then(|s| self.sessions.get(s))
    }

    pub fn open_sessions(&self) -> impl Iterator<Item = &SessionContext> {
        self.open_sessions
            .values()
            .filter_map(|s| self.sessions.get(s))
    }

    pub fn group_members(&self, group_id: &str) -> Option<&BTreeSet<String>> {
        self.groups.get(group_id)
    }

    pub fn groups(&self) -> &BTreeMap<String, BTreeSet<String>> {
        &self.groups
    }

    pub fn peer(&self, peer_id: &str) -> Option<&FederationPeer> {
        self.peers.get(peer_id)
    }

    pub fn peers(&self) -> impl Iterator<Item = &FederationPeer> {
        self.peers.values()
    }

    pub fn exports(&self) -> &[ExportReceipt] {
        &self.exports
    }

    pub fn implicit_profile(&self, annotator_ref: &str) -> Option<&ImplicitProfile> {
        self.profiles.get(annotator_ref)
    }

    pub fn index(&self) -> &PostingIndex {
        &self.index
    }

    pub(crate) fn index_mut(&mut self) -> &mut PostingIndex {
        &mut self.index
    }

    /// Whether `viewer` may read `a`. `None` is an anonymous reader.
    pub fn is_visible(&self, a: &AnnotationRecord, viewer: Option<&str>) -> bool {
        match &a.visibility {
            Visibility::ServerShared => true,
            Visibility::LocalPrivate => viewer == Some(a.annotator_ref.as_str()),
            Visibility::ProxyGroup { group_id } => viewer.is_some_and(|v| {
                v == a.annotator_ref || self.groups.get(group_id).is_some_and(|m| m.contains(v))
            }),
        }
    }

    pub fn is_local(&self, a: &AnnotationRecord) -> bool {
        a.origin_system == self.system_id
    }

    fn open_session_checked(&self, session_ref: &str) -> Result<&SessionContext> {
        let s = self
            .sessions
            .get(session_ref)
            .ok_or_else(|| Error::UnknownSession(session_ref.to_string()))?;
        if !s.is_open() {
            return Err(Error::SessionClosed(session_ref.to_string()));
        }
        Ok(s)
    }

    fn check_event(&self, session: &SessionContext, event: &SessionEvent) -> Result<()> {
        let last = session.last_activity();
        if event.at < last {
            return Err(Error::NonMonotonicTime { last, at: event.at });
        }
        match &event.kind {
            SessionEventKind::QueryIssued { .. } => Ok(()),
            SessionEventKind::DocumentConsulted { document_ref } => {
                if self.documents.contains_key(document_ref) {
                    Ok(())
                } else {
                    Err(Error::UnknownRef(document_ref.clone()))
                }
            }
            SessionEventKind::AnnotationCreated { context_ref } => {
                let id = AnnotationId {
                    origin_system: self.system_id.clone(),
                    context_ref: context_ref.clone(),
                };
                if self.annotations.contains_key(&id) {
                    Ok(())
                } else {
                    Err(Error::UnknownRef(context_ref.clone()))
                }
            }
        }
    }

    fn check_annotation(&self, a: &AnnotationRecord) -> Result<()> {
        if self.annotations.contains_key(&a.id()) {
            return Err(Error::DuplicateIdentity(a.id()));
        }
        let doc = self
            .documents
            .get(&a.anchor.document_ref)
            .ok_or_else(|| Error::UnknownDocument(a.anchor.document_ref.clone()))?;

        if !self.is_local(a) {
            if a.visibility != Visibility::ServerShared {
                return Err(Error::ValidationFailed(
                    "annotations from other systems must be server_shared".into(),
                ));
            }
            // The sender's document stub carries the availability time; the
            // federation layer checks it before committing.
            validate_federated(a.clone(), Timestamp::MIN)?;
            return Ok(());
        }

        if !self.users.contains_key(&a.annotator_ref) {
            return Err(Error::UnknownUser(a.annotator_ref.clone()));
        }
        let session = self.open_session_checked(&a.session_ref)?;
        if session.annotator_ref != a.annotator_ref {
            return Err(Error::ValidationFailed(format!(
                "session {} belongs to another user",
                a.session_ref
            )));
        }
        let last = session.last_activity();
        if a.created_at < last {
            return Err(Error::NonMonotonicTime {
                last,
                at: a.created_at,
            });
        }
        if let Visibility::ProxyGroup { group_id } = &a.visibility {
            if !self.groups.contains_key(group_id) {
                return Err(Error::UnknownGroup(group_id.clone()));
            }
        }
        let parents = |child: &AnnotationRecord, parent: &str| {
            self.annotations_on(&child.anchor.document_ref)
                .any(|p| p.context_ref == parent)
        };
        validate_annotation(a.clone(), doc, &parents)?;
        Ok(())
    }

    /// Checks that `m` may be applied to the current state.
    pub fn check(&self, m: &Mutation) -> Result<()> {
        match m {
            Mutation::PutUser(p) => {
                if p.annotator_ref.is_empty() {
                    return Err(Error::ValidationFailed("annotator_ref is empty".into()));
                }
                if self.users.contains_key(&p.annotator_ref) {
                    return Err(Error::DuplicateRef(p.annotator_ref.clone()));
                }
            }
            Mutation::SetCredential { annotator_ref, .. } => {
                if !self.users.contains_key(annotator_ref) {
                    return Err(Error::UnknownUser(annotator_ref.clone()));
                }
            }
            Mutation::PutDocument(d) => {
                if d.document_ref.is_empty() {
                    return Err(Error::ValidationFailed("document_ref is empty".into()));
                }
                if self.documents.contains_key(&d.document_ref) {
                    return Err(Error::DuplicateRef(d.document_ref.clone()));
                }
                if d.available_at <= 0 {
                    return Err(Error::ValidationFailed(
                        "available_at must be positive".into(),
                    ));
                }
            }
            Mutation::PutAnnotation(a) => self.check_annotation(a)?,
            Mutation::OpenSession(s) => {
                let user = self
                    .users
                    .get(&s.annotator_ref)
                    .ok_or_else(|| Error::UnknownUser(s.annotator_ref.clone()))?;
                if s.session_ref.is_empty() {
                    return Err(Error::ValidationFailed("session_ref is empty".into()));
                }
                if self.sessions.contains_key(&s.session_ref) {
                    return Err(Error::DuplicateRef(s.session_ref.clone()));
                }
                if let Some(open) = self.open_sessions.get(&s.annotator_ref) {
                    return Err(Error::SessionAlreadyOpen {
                        annotator_ref: s.annotator_ref.clone(),
                        session_ref: open.clone(),
                    });
                }
                if s.closed_at.is_some() || !s.events.is_empty() {
                    return Err(Error::ValidationFailed(
                        "a new session must be open and empty".into(),
                    ));
                }
                if s.explicit_profile != ExplicitProfile::from(user) {
                    return Err(Error::ValidationFailed(
                        "explicit profile does not match the stored profile".into(),
                    ));
                }
            }
            Mutation::AppendEvent { session_ref, event } => {
                let s = self.open_session_checked(session_ref)?;
                self.check_event(s, event)?;
            }
            Mutation::CloseSession { session_ref, at } => {
                let s = self.open_session_checked(session_ref)?;
                if *at < s.opened_at {
                    return Err(Error::TimeBeforeOpen {
                        opened_at: s.opened_at,
                        at: *at,
                    });
                }
                let last = s.last_activity();
                if *at < last {
                    return Err(Error::NonMonotonicTime { last, at: *at });
                }
            }
            Mutation::RegisterPeer(p) => {
                if p.peer_id.is_empty() || p.token.is_empty() || p.modes.is_empty() {
                    return Err(Error::ValidationFailed(
                        "peer id, token and modes must be non-empty".into(),
                    ));
                }
                if p.peer_id == self.system_id || self.peers.contains_key(&p.peer_id) {
                    return Err(Error::DuplicatePeer(p.peer_id.clone()));
                }
            }
            Mutation::SetCursor {
                peer_id,
                sync_cursor,
                remote_cursor,
            } => {
                let p = self
                    .peers
                    .get(peer_id)
                    .ok_or_else(|| Error::UnknownPeer(peer_id.clone()))?;
                if *sync_cursor < p.sync_cursor || *remote_cursor < p.remote_cursor {
                    return Err(Error::ValidationFailed(format!(
                        "cursor for {peer_id} may not move backwards"
                    )));
                }
            }
            Mutation::PutGroup { group_id } => {
                if group_id.is_empty() {
                    return Err(Error::ValidationFailed("group_id is empty".into()));
                }
                if self.groups.contains_key(group_id) {
                    return Err(Error::DuplicateRef(group_id.clone()));
                }
            }
            Mutation::AddGroupMember {
                group_id,
                annotator_ref,
            } => {
                if !self.groups.contains_key(group_id) {
                    return Err(Error::UnknownGroup(group_id.clone()));
                }
                if !self.users.contains_key(annotator_ref) {
                    return Err(Error::UnknownUser(annotator_ref.clone()));
                }
            }
            Mutation::RecordExport(r) => {
                if !self.peers.contains_key(&r.peer_id) {
                    return Err(Error::UnknownPeer(r.peer_id.clone()));
                }
            }
        }
        Ok(())
    }

    /// Applies a mutation that has passed [`StoreState::check`].
    pub fn apply_checked(&mut self, seq: u64, m: Mutation) {
        self.head = seq;
        match m {
            Mutation::PutUser(p) => {
                self.users.insert(p.annotator_ref.clone(), p);
            }
            Mutation::SetCredential {
                annotator_ref,
                credential,
            } => {
                self.credentials.insert(annotator_ref, credential);
            }
            Mutation::PutDocument(d) => {
                self.index.upsert_document(&d);
                self.documents.insert(d.document_ref.clone(), d);
            }
            Mutation::PutAnnotation(a) => {
                let id = a.id();
                self.index.upsert_annotation(&a);
                self.by_document
                    .entry(a.anchor.document_ref.clone())
                    .or_default()
                    .insert(id.clone());
                self.by_user
                    .entry(a.annotator_ref.clone())
                    .or_default()
                    .insert(id.clone());
                self.annotation_seqs.push((seq, id.clone()));
                if self.is_local(&a) {
                    if let Some(s) = self.sessions.get_mut(&a.session_ref) {
                        s.events.push(SessionEvent {
                            at: a.created_at,
                            kind: SessionEventKind::AnnotationCreated {
                                context_ref: a.context_ref.clone(),
                            },
                        });
                    }
                }
                self.annotations.insert(id, a);
            }
            Mutation::OpenSession(s) => {
                self.profiles
                    .entry(s.annotator_ref.clone())
                    .or_insert_with(|| ImplicitProfile::empty(&s.annotator_ref))
                    .observe_open();
                self.open_sessions
                    .insert(s.annotator_ref.clone(), s.session_ref.clone());
                self.sessions_by_user
                    .entry(s.annotator_ref.clone())
                    .or_default()
                    .push(s.session_ref.clone());
                self.sessions.insert(s.session_ref.clone(), s);
            }
            Mutation::AppendEvent { session_ref, event } => {
                if let Some(s) = self.sessions.get_mut(&session_ref) {
                    if let Some(p) = self.profiles.get_mut(&s.annotator_ref) {
                        p.observe_event(&event);
                    }
                    s.events.push(event);
                }
            }
            Mutation::CloseSession { session_ref, at } => {
                if let Some(s) = self.sessions.get_mut(&session_ref) {
                    s.closed_at = Some(at);
                    self.open_sessions.remove(&s.annotator_ref);
                    if let Some(p) = self.profiles.get_mut(&s.annotator_ref) {
                        p.observe_close(at - s.opened_at);
                    }
                }
            }
            Mutation::RegisterPeer(p) => {
                self.peers.insert(p.peer_id.clone(), p);
            }
            Mutation::SetCursor {
                peer_id,
                sync_cursor,
                remote_cursor,
            } => {
                if let Some(p) = self.peers.get_mut(&peer_id) {
                    p.sync_cursor = sync_cursor;
                    p.remote_cursor = remote_cursor;
                }
            }
            Mutation::PutGroup { group_id } => {
                self.groups.insert(group_id, BTreeSet::new());
            }
            Mutation::AddGroupMember {
                group_id,
                annotator_ref,
            } => {
                if let Some(g) = self.groups.get_mut(&group_id) {
                    g.insert(annotator_ref);
                }
            }
            Mutation::RecordExport(r) => self.exports.push(r),
        }
    }
}
