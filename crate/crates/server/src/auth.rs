//! In-memory session tokens with a fixed lifetime.

use std::collections::HashMap;
use std::sync::Mutex;
use std::time::Duration;

use chrono::{DateTime, Utc};
use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SessionToken {
    pub token: String,
    pub expires_at: DateTime<Utc>,
}

#[derive(Debug)]
pub struct SessionStore {
    ttl: Duration,
    sessions: Mutex<HashMap<String, DateTime<Utc>>>,
}

impl SessionStore {
    pub fn new(ttl: Duration) -> Self {
        Self {
            ttl,
            sessions: Mutex::new(HashMap::new()),
        }
    }

    pub fn issue(&self) -> SessionToken {
        self.issue_at(Utc::now())
    }

    fn issue_at(&self, now: DateTime<Utc>) -> SessionToken {
        let token = hex::encode(rand::random::<[u8; 32]>());
        let ttl = chrono::Duration::from_std(self.ttl).unwrap_or(chrono::Duration::MAX);
        let expires_at = now.checked_add_signed(ttl).unwrap_or(DateTime::<Utc>::MAX_UTC);
        let mut map = self.sessions.lock().expect("session lock");
        map.retain(|_, exp| *exp > now);
        map.insert(token.clone(), expires_at);
        SessionToken { token, expires_at }
    }

    /// Whether `token` is live; an expired token is forgotten.
    pub fn check(&self, token: &str) -> bool {
        self.check_at(token, Utc::now())
    }

    fn check_at(&self, token: &str, now: DateTime<Utc>) -> bool {
        let mut map = self.sessions.lock().expect("session lock");
        match map.get(token) {
            Some(exp) if *exp > now => true,
            Some(_) => {
                map.remove(token);
                false
            }
            None => false,
        }
    }

    pub fn revoke(&self, token: &str) -> bool {
        self.sessions.lock().expect("session lock").remove(token).is_some()
    }
}

/// Constant-time string comparison for credentials.
pub fn credentials_match(given: &str, expected: &str) -> bool {
    let (a, b) = (given.as_bytes(), expected.as_bytes());
    let mut diff = a.len() ^ b.len();
    for i in 0..a.len().max(b.len()) {
        diff |= (a.get(i).copied().unwrap_or(0) ^ b.get(i).copied().unwrap_or(0)) as usize;
    }
    diff == 0
}
