//! Identity providers and bearer sessions. The hub never stores user
//! passwords; a provider turns an assertion into a username.

use std::collections::BTreeMap;
use std::time::Duration;

use base64::engine::general_purpose::URL_SAFE_NO_PAD;
use base64::Engine as _;
use chrono::Utc;
use dashmap::DashMap;
use hmac::{Hmac, Mac};
use hub_core::{Timestamp, UserId};
use serde::{Deserialize, Serialize};
use sha2::Sha256;

pub const DEFAULT_SESSION_TTL: Duration = Duration::from_secs(12 * 3600);

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("authentication rejected: {0}")]
pub struct AuthRejected(pub String);

/// Result of a successful assertion check.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Identity {
    pub username: String,
    pub email: String,
}

pub trait IdentityProvider: Send + Sync + 'static {
    fn authenticate(&self, assertion: &str) -> Result<Identity, AuthRejected>;
}

/// `username:token` pairs from configuration. Meant for development and tests.
#[derive(Debug, Clone, Default)]
pub struct StaticProvider {
    tokens: BTreeMap<String, String>,
}

impl StaticProvider {
    pub fn new(tokens: BTreeMap<String, String>) -> Self {
        Self { tokens }
    }
}

impl IdentityProvider for StaticProvider {
    fn authenticate(&self, assertion: &str) -> Result<Identity, AuthRejected> {
        let (user, token) = assertion.split_once(':').ok_or_else(|| AuthRejected("expected user:token".into()))?;
        match self.tokens.get(user) {
            Some(expected) if constant_time_eq(expected.as_bytes(), token.as_bytes()) => {
                Ok(Identity { username: user.to_owned(), email: String::new() })
            }
            _ => Err(AuthRejected("unknown user or bad token".into())),
        }
    }
}

fn constant_time_eq(a: &[u8], b: &[u8]) -> bool {
    a.len() == b.len() && a.iter().zip(b).fold(0u8, |acc, (x, y)| acc | (x ^ y)) == 0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Claims {
    pub sub: String,
    #[serde(default)]
    pub email: String,
    /// Expiry, unix seconds.
    pub exp: i64,
}

/// Verifies assertions of the form `<base64url claims>.<base64url hmac>`,
/// as an external OIDC-style issuer sharing `secret` would mint them.
#[derive(Clone)]
pub struct SignedProvider {
    secret: Vec<u8>,
}

impl std::fmt::Debug for SignedProvider {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("SignedProvider(..)")
    }
}

impl SignedProvider {
    pub fn new(secret: impl Into<Vec<u8>>) -> Self {
        Self { secret: secret.into() }
    }

    fn mac(&self) -> Hmac<Sha256> {
        Hmac::<Sha256>::new_from_slice(&self.secret).expect("hmac accepts any key length")
    }

    /// Issuer side, used by tests and tooling.
    pub fn mint(&self, claims: &Claims) -> String {
        let payload = URL_SAFE_NO_PAD.encode(serde_json::to_vec(claims).expect("claims serialize"));
        let mut mac = self.mac();
        mac.update(payload.as_bytes());
        format!("{payload}.{}", URL_SAFE_NO_PAD.encode(mac.finalize().into_bytes()))
    }
}

impl IdentityProvider for SignedProvider {
    fn authenticate(&self, assertion: &str) -> Result<Identity, AuthRejected> {
        let reject = |m: &str| AuthRejected(m.to_owned());
        let (payload, sig) = assertion.split_once('.').ok_or_else(|| reject("malformed assertion"))?;
        let sig = URL_SAFE_NO_PAD.decode(sig).map_err(|_| reject("malformed signature"))?;
        let mut mac = self.mac();
        mac.update(payload.as_bytes());
        mac.verify_slice(&sig).map_err(|_| reject("bad signature"))?;
        let raw = URL_SAFE_NO_PAD.decode(payload).map_err(|_| reject("malformed claims"))?;
        let claims: Claims = serde_json::from_slice(&raw).map_err(|_| reject("malformed claims"))?;
        if claims.exp <= Utc::now().timestamp() {
            return Err(reject("assertion expired"));
        }
        Ok(Identity { username: claims.sub, email: claims.email })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Session {
    pub token: String,
    pub user_id: UserId,
    pub expires_at: Timestamp,
}

#[derive(Debug)]
pub struct Sessions {
    ttl: chrono::Duration,
    live: DashMap<String, Session>,
}

impl Sessions {
    pub fn new(ttl: Duration) -> Self {
        let ttl = chrono::Duration::from_std(ttl).unwrap_or(chrono::Duration::hours(12));
        Sessions { ttl, live: DashMap::new() }
    }

    pub fn issue(&self, user_id: UserId) -> Session {
        let token = hex::encode(rand::random::<[u8; 16]>());
        let session = Session { token: token.clone(), user_id, expires_at: Utc::now() + self.ttl };
        self.live.insert(token, session.clone());
        session
    }

    /// Live session for `token`; expired ones are dropped on sight.
    pub fn validate(&self, token: &str) -> Option<Session> {
        let session = self.live.get(token)?.clone();
        if session.expires_at <= Utc::now() {
            self.live.remove(token);
            return None;
        }
        Some(session)
    }

    pub fn revoke(&self, token: &str) {
        self.live.remove(token);
    }
}
