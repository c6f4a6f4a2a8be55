use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::model::{AnnotationId, AnnotationRecord, DocumentStub, Timestamp};

/// The four ways an external system may collaborate with this one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CollaborationMode {
    /// The peer queries our shared annotations.
    Receptive,
    /// The peer deposits annotations into our store.
    Admissive,
    /// We send annotations one-way to the peer.
    Interpretative,
    /// Both systems exchange annotations in repeated cycles.
    Collaborative,
}

impl CollaborationMode {
    pub const ALL: [CollaborationMode; 4] = [
        CollaborationMode::Receptive,
        CollaborationMode::Admissive,
        CollaborationMode::Interpretative,
        CollaborationMode::Collaborative,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CollaborationMode::Receptive => "receptive",
            CollaborationMode::Admissive => "admissive",
            CollaborationMode::Interpretative => "interpretative",
            CollaborationMode::Collaborative => "collaborative",
        }
    }
}

impl FromStr for CollaborationMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        CollaborationMode::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::ValidationFailed(format!("unknown collaboration mode {s:?}")))
    }
}

impl fmt::Display for CollaborationMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A registered external system.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FederationPeer {
    pub peer_id: String,
    pub base_url: String,
    pub modes: BTreeSet<CollaborationMode>,
    /// Shared secret presented as a bearer token in both directions.
    pub token: String,
    /// Highest peer-side sequence number we have merged.
    pub sync_cursor: u64,
    /// Highest local sequence number the peer has reported merging.
    #[serde(default)]
    pub remote_cursor: u64,
    pub registered_at: Timestamp,
}

/// An annotation together with the stub of the document it anchors to.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FederatedAnnotation {
    pub annotation: AnnotationRecord,
    pub document: DocumentStub,
}

/// Shared annotations of `origin_system` whose local sequence numbers fall in
/// `(from_seq, to_seq]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SyncDelta {
    pub origin_system: String,
    pub entries: Vec<FederatedAnnotation>,
    pub from_seq: u64,
    pub to_seq: u64,
    /// Set when the batch limit cut the range short; continue from `to_seq`.
    #[serde(default)]
    pub has_more: bool,
}

/// Body of `POST /fed/sync`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SyncRequest {
    pub peer_id: String,
    /// The requester's cursor into the responder's log.
    pub cursor: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub push: Option<SyncDelta>,
}

/// Response of `POST /fed/sync`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SyncResponse {
    pub delta: SyncDelta,
    /// The responder's cursor into the requester's log after merging `push`.
    pub peer_cursor: u64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SyncReport {
    pub sent: usize,
    pub received: usize,
    pub merged: usize,
    pub new_cursor: u64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MergeOutcome {
    pub merged: usize,
    pub duplicates: usize,
    pub rejected: usize,
}

/// Body of `POST /fed/deposit`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DepositRequest {
    pub peer_id: String,
    pub annotations: Vec<FederatedAnnotation>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DepositStatus {
    Accepted,
    DuplicateIdentity,
    ValidationFailed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DepositOutcome {
    pub identity: AnnotationId,
    pub status: DepositStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
}

/// Body of `POST /fed/export-sink`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExportBatch {
    pub origin_system: String,
    pub at: Timestamp,
    pub annotations: Vec<FederatedAnnotation>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExportStatus {
    Delivered,
    Failed,
}

/// Local record of one interpretative export.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExportReceipt {
    pub peer_id: String,
    pub items_sent: usize,
    pub at: Timestamp,
    pub status: ExportStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Body of `POST /fed/register`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegisterRequest {
    pub peer_id: String,
    pub base_url: String,
    pub modes: BTreeSet<CollaborationMode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub token: Option<String>,
}
