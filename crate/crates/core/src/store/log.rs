//! Newline-delimited JSON transaction log.
//!
//! Each line is one [`LogEntry`]:
//! ```json
//! {"seq":1,"at":1700000000,"op":"put_user","payload":{...}}
//! ```
//! Entries are only ever appended. A file-backed log fsyncs every append.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::federation::{ExportReceipt, FederationPeer};
use crate::model::{
    AnnotationRecord, AnnotatorProfile, DocumentRecord, SessionContext, SessionEvent, Timestamp,
};
use crate::synthesizer::Credential;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LogOp {
    PutUser,
    SetCredential,
    PutDocument,
    PutAnnotation,
    OpenSession,
    AppendEvent,
    CloseSession,
    RegisterPeer,
    SetCursor,
    PutGroup,
    AddGroupMember,
    RecordExport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    pub seq: u64,
    pub at: Timestamp,
    pub op: LogOp,
    pub payload: Value,
}

/// Typed form of a log entry's `op` + `payload`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", content = "payload", rename_all = "snake_case")]
pub enum Mutation {
    PutUser(AnnotatorProfile),
    SetCredential {
        annotator_ref: String,
        credential: Credential,
    },
    PutDocument(DocumentRecord),
    PutAnnotation(AnnotationRecord),
    OpenSession(SessionContext),
    AppendEvent {
        session_ref: String,
        event: SessionEvent,
    },
    CloseSession {
        session_ref: String,
        at: Timestamp,
    },
    RegisterPeer(FederationPeer),
    SetCursor {
        peer_id: String,
        sync_cursor: u64,
        remote_cursor: u64,
    },
    PutGroup {
        group_id: String,
    },
    AddGroupMember {
        group_id: String,
        annotator_ref: String,
    },
    RecordExport(ExportReceipt),
}

impl Mutation {
    pub fn op(&self) -> LogOp {
        match self {
            Mutation::PutUser(_) => LogOp::PutUser,
            Mutation::SetCredential { .. } => LogOp::SetCredential,
            Mutation::PutDocument(_) => LogOp::PutDocument,
            Mutation::PutAnnotation(_) => LogOp::PutAnnotation,
            Mutation::OpenSession(_) => LogOp::OpenSession,
            Mutation::AppendEvent { .. } => LogOp::AppendEvent,
            Mutation::CloseSession { .. } => LogOp::CloseSession,
            Mutation::RegisterPeer(_) => LogOp::RegisterPeer,
            Mutation::SetCursor { .. } => LogOp::SetCursor,
            Mutation::PutGroup { .. } => LogOp::PutGroup,
            Mutation::AddGroupMember { .. } => LogOp::AddGroupMember,
            Mutation::RecordExport(_) => LogOp::RecordExport,
        }
    }
}

impl LogEntry {
    pub fn encode(seq: u64, at: Timestamp, mutation: &Mutation) -> Result<Self> {
        let mut value = serde_json::to_value(mutation).map_err(|e| Error::CorruptEntry {
            seq,
            reason: e.to_string(),
        })?;
        let payload = value
            .get_mut("payload")
            .map(Value::take)
            .unwrap_or(Value::Null);
        Ok(LogEntry {
            seq,
            at,
            op: mutation.op(),
            payload,
        })
    }

    pub fn decode(&self) -> Result<Mutation> {
        let value = serde_json::json!({ "op": self.op, "payload": self.payload });
        serde_json::from_value(value).map_err(|e| Error::CorruptEntry {
            seq: self.seq,
            reason: e.to_string(),
        })
    }
}

/// Result of reading a log file.
#[derive(Debug, Default)]
pub struct LogContents {
    pub entries: Vec<LogEntry>,
    /// Byte length of the well-formed prefix when the final line was torn by a
    /// crash mid-append.
    pub torn_at: Option<u64>,
}

/// Reads every entry of a log file. A malformed final line without a trailing
/// newline is treated as a torn write and reported via `torn_at`; any other
/// malformed line is `CorruptEntry`.
pub fn read_log(path: &Path) -> Result<LogContents> {
    if !path.exists() {
        return Ok(LogContents::default());
    }
    let mut reader = BufReader::new(File::open(path)?);
    let mut contents = LogContents::default();
    let mut offset = 0u64;
    let mut line = String::new();
    loop {
        line.clear();
        let n = reader.read_line(&mut line)?;
        if n == 0 {
            break;
        }
        let complete = line.ends_with('\n');
        let text = line.trim();
        if !text.is_empty() {
            match serde_json::from_str::<LogEntry>(text) {
                Ok(entry) => contents.entries.push(entry),
                Err(_) if !complete => {
                    contents.torn_at = Some(offset);
                    break;
                }
                Err(e) => {
                    let seq = contents.entries.last().map_or(1, |l| l.seq + 1);
                    return Err(Error::CorruptEntry {
                        seq,
                        reason: e.to_string(),
                    });
                }
            }
        }
        offset += n as u64;
    }
    Ok(contents)
}

pub(crate) enum LogBackend {
    Memory(Vec<LogEntry>),
    File { path: PathBuf, file: File, len: u64 },
}

impl LogBackend {
    pub(crate) fn open_file(path: &Path, keep_bytes: Option<u64>) -> Result<Self> {
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        // One writer per log: a second process (or handle) gets a clear error.
        file.try_lock().map_err(|e| match e {
            std::fs::TryLockError::WouldBlock => {
                Error::Io(format!("{} is in use by another store", path.display()))
            }
            std::fs::TryLockError::Error(e) => e.into(),
        })?;
        if let Some(len) = keep_bytes {
            tracing::warn!(path = %path.display(), len, "truncating torn log tail");
            file.set_len(len)?;
        }
        let len = file.metadata()?.len();
        Ok(LogBackend::File {
            path: path.to_path_buf(),
            file,
            len,
        })
    }

    pub(crate) fn append(&mut self, entry: &LogEntry) -> Result<()> {
        match self {
            LogBackend::Memory(entries) => entries.push(entry.clone()),
            LogBackend::File { file, len, .. } => {
                let mut line = serde_json::to_vec(entry).map_err(|e| Error::CorruptEntry {
                    seq: entry.seq,
                    reason: e.to_string(),
                })?;
                line.push(b'\n');
                file.write_all(&line)?;
                file.sync_data()?;
                *len += line.len() as u64;
            }
        }
        Ok(())
    }

    pub(crate) fn entries(&self) -> Result<Vec<LogEntry>> {
        match self {
            LogBackend::Memory(entries) => Ok(entries.clone()),
            LogBackend::File { path, .. } => Ok(read_log(path)?.entries),
        }
    }

    pub(crate) fn path(&self) -> Option<&Path> {
        match self {
            LogBackend::Memory(_) => None,
            LogBackend::File { path, .. } => Some(path),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn encode_decode_roundtrip() {
        let m = Mutation::PutGroup {
            group_id: "g".into(),
        };
        let e = LogEntry::encode(3, 10, &m).unwrap();
        assert_eq!(e.op, LogOp::PutGroup);
        assert_eq!(e.payload, serde_json::json!({"group_id": "g"}));
        assert_eq!(e.decode().unwrap(), m);
    }

    #[test]
    fn undecodable_payload_is_corrupt() {
        let e = LogEntry {
            seq: 4,
            at: 0,
            op: LogOp::PutUser,
            payload: serde_json::json!({"x": 1}),
        };
        assert!(matches!(
            e.decode(),
            Err(Error::CorruptEntry { seq: 4, .. })
        ));
    }

    #[test]
    fn torn_tail_is_detected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("log.jsonl");
        let good = LogEntry::encode(
            1,
            0,
            &Mutation::PutGroup {
                group_id: "g".into(),
            },
        )
        .unwrap();
        let mut text = serde_json::to_string(&good).unwrap();
        text.push('\n');
        let keep = text.len() as u64;
        text.push_str("{\"seq\":2,\"at\":0,\"op\":\"put_gr");
        std::fs::write(&path, &text).unwrap();

        let contents = read_log(&path).unwrap();
        assert_eq!(contents.entries, vec![good]);
        assert_eq!(contents.torn_at, Some(keep));
    }

    #[test]
    fn malformed_interior_line_is_corrupt() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("log.jsonl");
        std::fs::write(&path, "not json\n").unwrap();
        assert!(matches!(read_log(&path), Err(Error::CorruptEntry { .. })));
    }
}
