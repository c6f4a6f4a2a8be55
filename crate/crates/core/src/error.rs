use crate::model::{AnnotationId, ModelError, Timestamp};
use crate::search::SearchError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Search(#[from] SearchError),
    #[error("reference {0} already exists")]
    DuplicateRef(String),
    #[error("annotation {0} already exists")]
    DuplicateIdentity(AnnotationId),
    #[error("peer {0} is already registered")]
    DuplicatePeer(String),
    #[error("unknown user {0}")]
    UnknownUser(String),
    #[error("unknown document {0}")]
    UnknownDocument(String),
    #[error("unknown session {0}")]
    UnknownSession(String),
    #[error("unknown peer {0}")]
    UnknownPeer(String),
    #[error("unknown group {0}")]
    UnknownGroup(String),
    #[error("unknown reference {0}")]
    UnknownRef(String),
    #[error("session {0} is closed")]
    SessionClosed(String),
    #[error("user {annotator_ref} already has open session {session_ref}")]
    SessionAlreadyOpen {
        annotator_ref: String,
        session_ref: String,
    },
    #[error("event at {at} precedes the previous event at {last}")]
    NonMonotonicTime { last: Timestamp, at: Timestamp },
    #[error("close at {at} precedes session open at {opened_at}")]
    TimeBeforeOpen { opened_at: Timestamp, at: Timestamp },
    #[error("{0}")]
    ValidationFailed(String),
    #[error("unauthorized: {0}")]
    Unauthorized(String),
    #[error("transport failure: {0}")]
    TransportFailure(String),
    #[error("corrupt log entry {seq}: {reason}")]
    CorruptEntry { seq: u64, reason: String },
    #[error("log sequence gap: expected {expected}, found {found}")]
    SequenceGap { expected: u64, found: u64 },
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl Error {
    /// Machine-readable code carried by API error bodies.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Model(e) => e.code(),
            Error::Search(SearchError::EmptyQuery) => "EmptyQuery",
            Error::Search(SearchError::InvalidWeight(_)) => "ValidationFailed",
            Error::DuplicateRef(_) => "DuplicateRef",
            Error::DuplicateIdentity(_) => "DuplicateIdentity",
            Error::DuplicatePeer(_) => "DuplicatePeer",
            Error::UnknownUser(_) => "UnknownUser",
            Error::UnknownDocument(_) => "UnknownDocument",
            Error::UnknownSession(_) => "UnknownSession",
            Error::UnknownPeer(_) => "UnknownPeer",
            Error::UnknownGroup(_) => "UnknownGroup",
            Error::UnknownRef(_) => "UnknownRef",
            Error::SessionClosed(_) => "SessionClosed",
            Error::SessionAlreadyOpen { .. } => "SessionAlreadyOpen",
            Error::NonMonotonicTime { .. } => "NonMonotonicTime",
            Error::TimeBeforeOpen { .. } => "TimeBeforeOpen",
            Error::ValidationFailed(_) => "ValidationFailed",
            Error::Unauthorized(_) => "Unauthorized",
            Error::TransportFailure(_) => "TransportFailure",
            Error::CorruptEntry { .. } => "CorruptEntry",
            Error::SequenceGap { .. } => "SequenceGap",
            Error::Io(_) => "Internal",
        }
    }
}
