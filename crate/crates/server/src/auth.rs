//! User accounts with salted Argon2id password digests, and bearer sessions.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use argon2::password_hash::{PasswordHash, PasswordHasher, PasswordVerifier, SaltString};
use argon2::{Algorithm, Argon2, Params, Version};
use chrono::{DateTime, Duration, Utc};
use parking_lot::RwLock;
use rand::RngCore;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use memora_core::UserId;

pub const MIN_PASSWORD_CHARS: usize = 8;
/// Argon2id memory cost in KiB; each KiB block is one unit of work per pass.
const ARGON2_MEMORY_KIB: u32 = 19_456;
const ARGON2_PASSES: u32 = 2;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AuthError {
    #[error("username is already taken")]
    DuplicateUsername,
    #[error("username must not be empty")]
    EmptyUsername,
    #[error("password must be at least {MIN_PASSWORD_CHARS} characters")]
    WeakPassword,
    #[error("invalid credentials")]
    BadCredentials,
    #[error("missing, unknown or expired token")]
    Unauthenticated,
    #[error("account storage failed: {0}")]
    Storage(String),
}

fn hasher() -> Argon2<'static> {
    let params = Params::new(ARGON2_MEMORY_KIB, ARGON2_PASSES, 1, None).expect("static argon2 params");
    Argon2::new(Algorithm::Argon2id, Version::V0x13, params)
}

pub fn hash_password(password: &str) -> String {
    let mut bytes = [0u8; 16];
    rand::rng().fill_bytes(&mut bytes);
    let salt = SaltString::encode_b64(&bytes).expect("16-byte salt encodes");
    hasher()
        .hash_password(password.as_bytes(), &salt)
        .expect("argon2 hashing")
        .to_string()
}

/// Constant-time check of `password` against a PHC digest string.
pub fn verify_password(password: &str, digest: &str) -> bool {
    PasswordHash::new(digest)
        .map(|parsed| hasher().verify_password(password.as_bytes(), &parsed).is_ok())
        .unwrap_or(false)
}

/// Digest checked for unknown usernames so they cost as much as real ones.
fn decoy_digest() -> &'static str {
    static DECOY: OnceLock<String> = OnceLock::new();
    DECOY.get_or_init(|| hash_password(&random_hex(16)))
}

fn random_hex(bytes: usize) -> String {
    let mut buf = vec![0u8; bytes];
    rand::rng().fill_bytes(&mut buf);
    hex::encode(buf)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserAccount {
    pub user_id: UserId,
    pub username: String,
    pub password_digest: String,
    pub created_at: DateTime<Utc>,
}

/// Account table, optionally mirrored to a JSON file.
#[derive(Debug, Default)]
pub struct Accounts {
    by_username: RwLock<HashMap<String, UserAccount>>,
    path: Option<PathBuf>,
}

impl Accounts {
    pub fn in_memory() -> Self {
        Self::default()
    }

    pub fn open(path: &Path) -> Result<Self, AuthError> {
        let accounts: Vec<UserAccount> = if path.exists() {
            let raw = std::fs::read_to_string(path).map_err(|e| AuthError::Storage(e.to_string()))?;
            serde_json::from_str(&raw).map_err(|e| AuthError::Storage(e.to_string()))?
        } else {
            Vec::new()
        };
        Ok(Self {
            by_username: RwLock::new(accounts.into_iter().map(|a| (a.username.clone(), a)).collect()),
            path: Some(path.to_path_buf()),
        })
    }

    fn persist(&self, table: &HashMap<String, UserAccount>) -> Result<(), AuthError> {
        let Some(path) = &self.path else { return Ok(()) };
        let mut accounts: Vec<&UserAccount> = table.values().collect();
        accounts.sort_by(|a, b| a.username.cmp(&b.username));
        let body = serde_json::to_string_pretty(&accounts).expect("accounts serialize");
        let tmp = path.with_extension("json.tmp");
        std::fs::write(&tmp, body)
            .and_then(|_| std::fs::rename(&tmp, path))
            .map_err(|e| AuthError::Storage(e.to_string()))
    }

    /// Rejects a registration before any hashing work is spent on it.
    pub fn check_new(&self, username: &str, password: &str) -> Result<(), AuthError> {
        if username.trim().is_empty() {
            return Err(AuthError::EmptyUsername);
        }
        if password.chars().count() < MIN_PASSWORD_CHARS {
            return Err(AuthError::WeakPassword);
        }
        if self.by_username.read().contains_key(username) {
            return Err(AuthError::DuplicateUsername);
        }
        Ok(())
    }

    pub fn register(&self, username: &str, password: &str) -> Result<UserId, AuthError> {
        self.check_new(username, password)?;
        self.insert_hashed(username, hash_password(password))
    }

    /// Creates an account from a digest produced by [`hash_password`].
    pub fn insert_hashed(&self, username: &str, password_digest: String) -> Result<UserId, AuthError> {
        let account = UserAccount {
            user_id: UserId::new(uuid::Uuid::new_v4().to_string()),
            username: username.to_string(),
            password_digest,
            created_at: Utc::now(),
        };
        let mut table = self.by_username.write();
        if table.contains_key(username) {
            return Err(AuthError::DuplicateUsername);
        }
        let user_id = account.user_id.clone();
        table.insert(username.to_string(), account);
        if let Err(e) = self.persist(&table) {
            table.remove(username);
            return Err(e);
        }
        Ok(user_id)
    }

    pub fn verify(&self, username: &str, password: &str) -> Result<UserId, AuthError> {
        let (user_id, digest) = self.credentials(username);
        match user_id {
            Some(id) if verify_password(password, &digest) => Ok(id),
            _ => Err(AuthError::BadCredentials),
        }
    }

    /// The account's user id and digest; unknown names get `None` and a decoy
    /// digest so callers can verify in constant time either way.
    pub fn credentials(&self, username: &str) -> (Option<UserId>, String) {
        match self.by_username.read().get(username) {
            Some(a) => (Some(a.user_id.clone()), a.password_digest.clone()),
            None => (None, decoy_digest().to_string()),
        }
    }

    pub fn len(&self) -> usize {
        self.by_username.read().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionToken {
    pub token: String,
    pub user_id: UserId,
    pub expires_at: DateTime<Utc>,
}

#[derive(Debug)]
pub struct Sessions {
    tokens: RwLock<HashMap<String, SessionToken>>,
    ttl: Duration,
}

impl Sessions {
    pub fn new(ttl: Duration) -> Self {
        Self {
            tokens: RwLock::new(HashMap::new()),
            ttl,
        }
    }

    /// Issues a 256-bit random token.
    pub fn issue(&self, user_id: UserId) -> SessionToken {
        self.issue_at(user_id, Utc::now())
    }

    pub fn issue_at(&self, user_id: UserId, now: DateTime<Utc>) -> SessionToken {
        let session = SessionToken {
            token: random_hex(32),
            user_id,
            expires_at: now + self.ttl,
        };
        self.tokens.write().insert(session.token.clone(), session.clone());
        session
    }

    pub fn authenticate(&self, token: &str) -> Result<UserId, AuthError> {
        self.authenticate_at(token, Utc::now())
    }

    pub fn authenticate_at(&self, token: &str, now: DateTime<Utc>) -> Result<UserId, AuthError> {
        let session = self.tokens.read().get(token).cloned();
        match session {
            Some(s) if s.expires_at > now => Ok(s.user_id),
            Some(_) => {
                self.tokens.write().remove(token);
                Err(AuthError::Unauthenticated)
            }
            None => Err(AuthError::Unauthenticated),
        }
    }

    pub fn revoke(&self, token: &str) {
        self.tokens.write().remove(token);
    }
}
