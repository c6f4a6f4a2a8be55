//! Exchange of annotations with external systems.
//!
//! Four collaboration modes are supported, each gated on the peer having
//! registered with it:
//!
//! * receptive: a peer (or anonymous caller) searches our shared annotations;
//! * admissive: a registered peer deposits annotations into our store;
//! * interpretative: we push a one-way export to the peer and expect nothing back;
//! * collaborative: both sides exchange deltas in repeated cycles.
//!
//! Annotation identity is `(origin_system, context_ref)` and records are never
//! edited, so merging is a set union: unseen identities are stored, seen ones
//! are skipped. Only `server_shared` annotations ever leave the store.

mod transport;
mod types;

use std::collections::BTreeSet;

use subtle::ConstantTimeEq;
use tracing::{debug, warn};

pub use transport::{InProcessTransport, PeerTransport};
pub use types::{
    CollaborationMode, DepositOutcome, DepositRequest, DepositStatus, ExportBatch, ExportReceipt,
    ExportStatus, FederatedAnnotation, FederationPeer, MergeOutcome, RegisterRequest, SyncDelta,
    SyncReport, SyncRequest, SyncResponse,
};

use crate::error::{Error, Result};
use crate::model::{generate_ref, validate_federated, AnnotationRecord, DocumentStub, Visibility};
use crate::search::query_terms;
use crate::store::{sort_annotations, AnnotationFilter, Mutation, SharedStore, Store};

/// Maximum number of annotations carried by one delta.
pub const DELTA_LIMIT: usize = 500;

/// Upper bound on continuation rounds within one sync cycle.
const MAX_ROUNDS: usize = 10_000;

impl Store {
    /// Registers an external system. A token is generated unless one is
    /// supplied (both sides of a collaborative pairing share one secret).
    pub fn register_peer(
        &mut self,
        peer_id: &str,
        base_url: &str,
        modes: BTreeSet<CollaborationMode>,
        token: Option<String>,
    ) -> Result<FederationPeer> {
        let peer = FederationPeer {
            peer_id: peer_id.to_string(),
            base_url: base_url.to_string(),
            modes,
            token: token.unwrap_or_else(generate_ref),
            sync_cursor: 0,
            remote_cursor: 0,
            registered_at: self.now(),
        };
        self.commit(Mutation::RegisterPeer(peer.clone()))?;
        Ok(peer)
    }

    /// Checks a peer's token and that it registered with `mode`.
    pub fn authorize_peer(
        &self,
        peer_id: &str,
        token: &str,
        mode: CollaborationMode,
    ) -> Result<&FederationPeer> {
        let peer = self
            .state()
            .peer(peer_id)
            .ok_or_else(|| Error::Unauthorized(format!("peer {peer_id} is not registered")))?;
        if !bool::from(peer.token.as_bytes().ct_eq(token.as_bytes())) {
            return Err(Error::Unauthorized(format!("bad token for peer {peer_id}")));
        }
        if !peer.modes.contains(&mode) {
            return Err(Error::Unauthorized(format!(
                "peer {peer_id} is not registered as {mode}"
            )));
        }
        Ok(peer)
    }

    fn local_peer(&self, peer_id: &str, mode: CollaborationMode) -> Result<FederationPeer> {
        let peer = self
            .state()
            .peer(peer_id)
            .ok_or_else(|| Error::Unauthorized(format!("peer {peer_id} is not registered")))?;
        if !peer.modes.contains(&mode) {
            return Err(Error::Unauthorized(format!(
                "peer {peer_id} is not registered as {mode}"
            )));
        }
        Ok(peer.clone())
    }

    fn federated(&self, annotation: &AnnotationRecord) -> FederatedAnnotation {
        let document = self
            .state()
            .document(&annotation.anchor.document_ref)
            .map(DocumentStub::of)
            .unwrap_or_else(|| DocumentStub {
                document_ref: annotation.anchor.document_ref.clone(),
                title: String::new(),
                descriptors: Vec::new(),
                available_at: annotation.created_at,
            });
        FederatedAnnotation {
            annotation: annotation.clone(),
            document,
        }
    }

    /// Shared annotations matching at least one query term in their body or
    /// quoted text. Read-only.
    ///
    /// `requester` is `None` for anonymous callers, otherwise a peer id and
    /// token that must be registered as receptive.
    pub fn receptive_query(
        &self,
        query: &str,
        requester: Option<(&str, &str)>,
    ) -> Result<Vec<FederatedAnnotation>> {
        if let Some((peer_id, token)) = requester {
            self.authorize_peer(peer_id, token, CollaborationMode::Receptive)?;
        }
        let terms = query_terms(query)?;
        let index = self.state().index();
        let ids: BTreeSet<_> = terms
            .iter()
            .flat_map(|t| index.annotations_for(t).map(|(id, _, _)| id.clone()))
            .collect();
        let mut hits: Vec<AnnotationRecord> = ids
            .iter()
            .filter_map(|id| self.state().annotation(id))
            .filter(|a| a.visibility == Visibility::ServerShared)
            .cloned()
            .collect();
        sort_annotations(&mut hits);
        Ok(hits.iter().map(|a| self.federated(a)).collect())
    }

    /// Stores annotations deposited by an admissive peer. Each is re-homed to
    /// `origin_system = peer_id` and judged independently.
    pub fn admissive_deposit(
        &mut self,
        peer_id: &str,
        token: &str,
        items: Vec<FederatedAnnotation>,
    ) -> Result<Vec<DepositOutcome>> {
        self.authorize_peer(peer_id, token, CollaborationMode::Admissive)?;
        let mut outcomes = Vec::with_capacity(items.len());
        for mut item in items {
            item.annotation.origin_system = peer_id.to_string();
            let identity = item.annotation.id();
            let outcome = match self.merge_one(item) {
                Ok(true) => DepositOutcome {
                    identity,
                    status: DepositStatus::Accepted,
                    message: None,
                },
                Ok(false) => DepositOutcome {
                    identity,
                    status: DepositStatus::DuplicateIdentity,
                    message: None,
                },
                Err(e) => DepositOutcome {
                    identity,
                    status: DepositStatus::ValidationFailed,
                    message: Some(e.to_string()),
                },
            };
            outcomes.push(outcome);
        }
        Ok(outcomes)
    }

    /// Stores one federated annotation unless its identity is already known.
    /// Returns whether it was stored.
    fn merge_one(&mut self, item: FederatedAnnotation) -> Result<bool> {
        let FederatedAnnotation {
            annotation,
            document,
        } = item;
        if self.state().annotation(&annotation.id()).is_some() {
            return Ok(false);
        }
        if annotation.anchor.document_ref != document.document_ref {
            return Err(Error::ValidationFailed(
                "document stub does not match the annotation anchor".into(),
            ));
        }
        if annotation.origin_system == self.system_id() {
            return Err(Error::ValidationFailed(
                "annotation claims to originate from this system".into(),
            ));
        }
        if annotation.visibility != Visibility::ServerShared {
            return Err(Error::ValidationFailed(
                "only server_shared annotations are accepted".into(),
            ));
        }
        let annotation = validate_federated(annotation, document.available_at)?;
        if self.state().document(&document.document_ref).is_none() {
            self.commit(Mutation::PutDocument(document.into_placeholder()))?;
        }
        self.commit(Mutation::PutAnnotation(annotation))?;
        Ok(true)
    }

    /// Merges a delta: unseen identities are validated and stored, seen ones
    /// skipped, failures logged and skipped. Never overwrites.
    pub fn merge_remote(&mut self, delta: &SyncDelta) -> MergeOutcome {
        let mut outcome = MergeOutcome::default();
        for item in &delta.entries {
            match self.merge_one(item.clone()) {
                Ok(true) => outcome.merged += 1,
                Ok(false) => outcome.duplicates += 1,
                Err(e) => {
                    warn!(
                        origin = %delta.origin_system,
                        identity = %item.annotation.id(),
                        error = %e,
                        "skipping federated annotation"
                    );
                    outcome.rejected += 1;
                }
            }
        }
        outcome
    }

    /// Shared annotations for `requester` with local seq in `(from, head]`,
    /// excluding those that originated at the requester. Bounded by
    /// [`DELTA_LIMIT`].
    pub fn build_delta(&self, requester: &str, from: u64) -> SyncDelta {
        let head = self.state().head();
        let mut entries = Vec::new();
        let mut to_seq = from;
        let mut has_more = false;
        for (seq, a) in self.state().annotations_in_seq_range(from, head) {
            if a.visibility != Visibility::ServerShared || a.origin_system == requester {
                continue;
            }
            if entries.len() == DELTA_LIMIT {
                has_more = true;
                break;
            }
            entries.push(self.federated(a));
            to_seq = seq;
        }
        if !has_more {
            to_seq = head.max(from);
        }
        SyncDelta {
            origin_system: self.system_id().to_string(),
            entries,
            from_seq: from,
            to_seq,
            has_more,
        }
    }

    /// Responder half of a collaborative cycle: merge the requester's push,
    /// record both cursors, and answer with our delta since its cursor.
    pub fn serve_sync(&mut self, token: &str, request: &SyncRequest) -> Result<SyncResponse> {
        let peer = self
            .authorize_peer(&request.peer_id, token, CollaborationMode::Collaborative)?
            .clone();
        let mut sync_cursor = peer.sync_cursor;
        if let Some(push) = &request.push {
            if push.origin_system != peer.peer_id {
                return Err(Error::ValidationFailed(format!(
                    "delta from {} presented by peer {}",
                    push.origin_system, peer.peer_id
                )));
            }
            let outcome = self.merge_remote(push);
            debug!(peer = %peer.peer_id, ?outcome, "merged pushed delta");
            sync_cursor = sync_cursor.max(push.to_seq);
        }
        let remote_cursor = peer.remote_cursor.max(request.cursor);
        self.advance_cursors(&peer, sync_cursor, remote_cursor)?;
        Ok(SyncResponse {
            delta: self.build_delta(&peer.peer_id, request.cursor),
            peer_cursor: sync_cursor,
        })
    }

    fn advance_cursors(
        &mut self,
        peer: &FederationPeer,
        sync_cursor: u64,
        remote_cursor: u64,
    ) -> Result<()> {
        let current = self
            .state()
            .peer(&peer.peer_id)
            .ok_or_else(|| Error::UnknownPeer(peer.peer_id.clone()))?;
        let sync_cursor = sync_cursor.max(current.sync_cursor);
        let remote_cursor = remote_cursor.max(current.remote_cursor);
        if sync_cursor != current.sync_cursor || remote_cursor != current.remote_cursor {
            self.commit(Mutation::SetCursor {
                peer_id: peer.peer_id.clone(),
                sync_cursor,
                remote_cursor,
            })?;
        }
        Ok(())
    }

    /// Peer side of an interpretative export: authenticate and count.
    pub fn accept_export(&self, peer_id: &str, token: &str, batch: &ExportBatch) -> Result<usize> {
        self.authorize_peer(peer_id, token, CollaborationMode::Interpretative)?;
        Ok(batch.annotations.len())
    }
}

/// One full collaborative cycle with `peer_id`: push our delta since the
/// peer's recorded cursor for us, pull the peer's delta since our cursor,
/// merge it and advance both cursors. Continues while either side reports
/// more. On transport failure the cursors stay where they were.
pub fn collaborative_sync<T: PeerTransport + ?Sized>(
    shared: &SharedStore,
    peer_id: &str,
    transport: &T,
) -> Result<SyncReport> {
    let lock = shared.peer_lock(peer_id);
    let _in_flight = lock.lock().unwrap_or_else(|p| p.into_inner());

    let mut report = SyncReport::default();
    for _ in 0..MAX_ROUNDS {
        let (peer, request) = {
            let store = shared.read();
            let peer = store.local_peer(peer_id, CollaborationMode::Collaborative)?;
            let push = store.build_delta(peer_id, peer.remote_cursor);
            let request = SyncRequest {
                peer_id: store.system_id().to_string(),
                cursor: peer.sync_cursor,
                push: Some(push),
            };
            (peer, request)
        };
        let response = transport.sync(&peer, &request)?;
        if response.delta.origin_system != peer.peer_id {
            return Err(Error::ValidationFailed(format!(
                "peer {} answered with a delta from {}",
                peer.peer_id, response.delta.origin_system
            )));
        }
        let push = request.push.as_ref().expect("push is always built");
        {
            let mut store = shared.write();
            let outcome = store.merge_remote(&response.delta);
            store.advance_cursors(&peer, response.delta.to_seq, response.peer_cursor)?;
            report.merged += outcome.merged;
            report.new_cursor = store
                .state()
                .peer(peer_id)
                .map_or(response.delta.to_seq, |p| p.sync_cursor);
        }
        report.sent += push.entries.len();
        report.received += response.delta.entries.len();
        if !push.has_more && !response.delta.has_more {
            return Ok(report);
        }
    }
    warn!(peer = peer_id, "sync cycle stopped after the round limit");
    Ok(report)
}

/// Sends the shared annotations matching `selection` one-way to an
/// interpretative peer and records a receipt. An empty selection is recorded
/// without contacting the peer.
pub fn interpretative_export<T: PeerTransport + ?Sized>(
    shared: &SharedStore,
    peer_id: &str,
    selection: &AnnotationFilter,
    transport: &T,
) -> Result<ExportReceipt> {
    let (peer, batch) = {
        let store = shared.read();
        let peer = store.local_peer(peer_id, CollaborationMode::Interpretative)?;
        let annotations: Vec<FederatedAnnotation> = store
            .visible_annotations(selection, None)
            .iter()
            .map(|a| store.federated(a))
            .collect();
        let batch = ExportBatch {
            origin_system: store.system_id().to_string(),
            at: store.now(),
            annotations,
        };
        (peer, batch)
    };

    let delivery = if batch.annotations.is_empty() {
        Ok(())
    } else {
        transport.export(&peer, &batch)
    };
    let receipt = ExportReceipt {
        peer_id: peer_id.to_string(),
        items_sent: batch.annotations.len(),
        at: batch.at,
        status: if delivery.is_ok() {
            ExportStatus::Delivered
        } else {
            ExportStatus::Failed
        },
        error: delivery.as_ref().err().map(|e| e.to_string()),
    };
    shared
        .write()
        .commit(Mutation::RecordExport(receipt.clone()))?;
    delivery.map(|()| receipt)
}
