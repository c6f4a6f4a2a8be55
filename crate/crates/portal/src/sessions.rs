//! Bearer tokens for logged-in users.
//!
//! Tokens live only in memory. They are deliberately distinct from session
//! refs, which are stored in the log and carried by shared annotations.

use std::collections::HashMap;
use std::sync::Mutex;

use marginalia_core::model::generate_ref;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Login {
    pub session_ref: String,
    pub annotator_ref: String,
}

#[derive(Debug, Default)]
pub struct Tokens {
    by_token: Mutex<HashMap<String, Login>>,
}

impl Tokens {
    pub fn issue(&self, login: Login) -> String {
        let token = generate_ref();
        self.lock().insert(token.clone(), login);
        token
    }

    pub fn resolve(&self, token: &str) -> Option<Login> {
        self.lock().get(token).cloned()
    }

    pub fn revoke(&self, token: &str) {
        self.lock().remove(token);
    }

    /// Whether some live token still points at `session_ref`.
    pub fn holds(&self, session_ref: &str) -> bool {
        self.lock().values().any(|l| l.session_ref == session_ref)
    }

    fn lock(&self) -> std::sync::MutexGuard<'_, HashMap<String, Login>> {
        self.by_token.lock().unwrap_or_else(|p| p.into_inner())
    }
}
