//! Session lifecycle and user profiles.
//!
//! The explicit profile is the identity a user supplied at registration; a
//! snapshot of it is attached to each session when it opens. The implicit
//! profile is synthesized from behaviour: time on the system, documents
//! consulted and queries issued. It is maintained incrementally as session
//! entries are applied to the store.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use sha2::Sha256;
use subtle::ConstantTimeEq;

use crate::error::{Error, Result};
use crate::model::{
    generate_ref, ExplicitProfile, SessionContext, SessionEvent, SessionEventKind, Timestamp,
};
use crate::store::{Mutation, Store};

const PBKDF2_ROUNDS: u32 = 20_000;

/// Salted PBKDF2-HMAC-SHA256 password hash.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Credential {
    pub salt: String,
    pub hash: String,
    pub rounds: u32,
}

impl Credential {
    pub fn derive(password: &str) -> Self {
        let salt: [u8; 16] = rand::random();
        Self::derive_with(password, &salt, PBKDF2_ROUNDS)
    }

    fn derive_with(password: &str, salt: &[u8], rounds: u32) -> Self {
        let mut out = [0u8; 32];
        pbkdf2::pbkdf2_hmac::<Sha256>(password.as_bytes(), salt, rounds, &mut out);
        Credential {
            salt: hex::encode(salt),
            hash: hex::encode(out),
            rounds,
        }
    }

    pub fn verify(&self, password: &str) -> bool {
        let Ok(salt) = hex::decode(&self.salt) else {
            return false;
        };
        let candidate = Self::derive_with(password, &salt, self.rounds);
        candidate.hash.as_bytes().ct_eq(self.hash.as_bytes()).into()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryRecord {
    pub terms: Vec<String>,
    pub at: Timestamp,
}

/// Behaviour-derived profile of one user.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImplicitProfile {
    pub annotator_ref: String,
    /// Sum of `closed_at - opened_at` over closed sessions, in seconds.
    pub total_time_on_system: Timestamp,
    pub documents_consulted: BTreeMap<String, u64>,
    pub queries_issued: Vec<QueryRecord>,
    pub sessions_count: u64,
}

impl ImplicitProfile {
    pub fn empty(annotator_ref: &str) -> Self {
        ImplicitProfile {
            annotator_ref: annotator_ref.to_string(),
            total_time_on_system: 0,
            documents_consulted: BTreeMap::new(),
            queries_issued: Vec::new(),
            sessions_count: 0,
        }
    }

    pub(crate) fn observe_open(&mut self) {
        self.sessions_count += 1;
    }

    pub(crate) fn observe_event(&mut self, event: &SessionEvent) {
        match &event.kind {
            SessionEventKind::DocumentConsulted { document_ref } => {
                *self
                    .documents_consulted
                    .entry(document_ref.clone())
                    .or_default() += 1;
            }
            SessionEventKind::QueryIssued { terms } => self.queries_issued.push(QueryRecord {
                terms: terms.clone(),
                at: event.at,
            }),
            SessionEventKind::AnnotationCreated { .. } => {}
        }
    }

    pub(crate) fn observe_close(&mut self, length: Timestamp) {
        self.total_time_on_system += length;
    }
}

/// Explicit and implicit profile of a user, as exported by the portal.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserProfile {
    pub explicit: ExplicitProfile,
    pub implicit: ImplicitProfile,
}

impl Store {
    pub fn set_password(&mut self, annotator_ref: &str, password: &str) -> Result<()> {
        self.commit(Mutation::SetCredential {
            annotator_ref: annotator_ref.to_string(),
            credential: Credential::derive(password),
        })?;
        Ok(())
    }

    /// Verifies a user's password. Unknown users and wrong passwords are
    /// indistinguishable to the caller.
    pub fn authenticate(&self, annotator_ref: &str, password: &str) -> Result<()> {
        match self.state().credential(annotator_ref) {
            Some(c) if c.verify(password) => Ok(()),
            _ => Err(Error::Unauthorized("invalid credentials".into())),
        }
    }

    /// Opens a session for `annotator_ref` at `at`.
    ///
    /// An existing open session that has been idle for longer than the
    /// configured timeout is first closed at its last activity time.
    pub fn open_session(&mut self, annotator_ref: &str, at: Timestamp) -> Result<SessionContext> {
        let user = self.get_user(annotator_ref)?;
        let explicit_profile = ExplicitProfile::from(user);
        if let Some(open) = self.state().open_session_of(annotator_ref) {
            let last = open.last_activity();
            if at - last > self.config().session_timeout {
                let session_ref = open.session_ref.clone();
                self.close_session(&session_ref, last)?;
            }
        }
        let session = SessionContext {
            session_ref: generate_ref(),
            annotator_ref: annotator_ref.to_string(),
            opened_at: at,
            closed_at: None,
            events: Vec::new(),
            explicit_profile,
        };
        self.commit(Mutation::OpenSession(session.clone()))?;
        Ok(session)
    }

    pub fn record_event(
        &mut self,
        session_ref: &str,
        event: SessionEvent,
    ) -> Result<SessionContext> {
        self.commit(Mutation::AppendEvent {
            session_ref: session_ref.to_string(),
            event,
        })?;
        Ok(self.get_session(session_ref)?.clone())
    }

    pub fn close_session(&mut self, session_ref: &str, at: Timestamp) -> Result<SessionContext> {
        self.commit(Mutation::CloseSession {
            session_ref: session_ref.to_string(),
            at,
        })?;
        Ok(self.get_session(session_ref)?.clone())
    }

    pub fn get_session(&self, session_ref: &str) -> Result<&SessionContext> {
        self.state()
            .session(session_ref)
            .ok_or_else(|| Error::UnknownSession(session_ref.to_string()))
    }

    /// Closes every open session idle for longer than the timeout, at its
    /// last activity time. Returns the closed session refs.
    pub fn expire_idle_sessions(&mut self, now: Timestamp) -> Result<Vec<String>> {
        let timeout = self.config().session_timeout;
        let idle: Vec<(String, Timestamp)> = self
            .state()
            .open_sessions()
            .filter(|s| now - s.last_activity() > timeout)
            .map(|s| (s.session_ref.clone(), s.last_activity()))
            .collect();
        for (session_ref, last) in &idle {
            self.close_session(session_ref, *last)?;
        }
        Ok(idle.into_iter().map(|(s, _)| s).collect())
    }

    pub fn compute_implicit_profile(&self, annotator_ref: &str) -> Result<ImplicitProfile> {
        self.get_user(annotator_ref)?;
        Ok(self
            .state()
            .implicit_profile(annotator_ref)
            .cloned()
            .unwrap_or_else(|| ImplicitProfile::empty(annotator_ref)))
    }

    pub fn user_profile(&self, annotator_ref: &str) -> Result<UserProfile> {
        let explicit = ExplicitProfile::from(self.get_user(annotator_ref)?);
        Ok(UserProfile {
            explicit,
            implicit: self.compute_implicit_profile(annotator_ref)?,
        })
    }
}
