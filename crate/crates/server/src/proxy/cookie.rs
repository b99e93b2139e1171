//! Signed per-route cookies. The API issues one after it has authorized a
//! viewer for a route; the proxy only checks the signature and expiry.

use hmac::{Hmac, Mac};
use sha2::Sha256;

pub const COOKIE_NAME: &str = "hub_route";

#[derive(Clone)]
pub struct RouteSigner {
    key: Vec<u8>,
}

impl std::fmt::Debug for RouteSigner {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("RouteSigner(..)")
    }
}

impl RouteSigner {
    pub fn new(key: impl Into<Vec<u8>>) -> Self {
        Self { key: key.into() }
    }

    pub fn random() -> Self {
        Self::new(rand::random::<[u8; 32]>().to_vec())
    }

    fn mac(&self, prefix: &str, expires: i64) -> Hmac<Sha256> {
        let mut mac = Hmac::<Sha256>::new_from_slice(&self.key).expect("hmac accepts any key length");
        mac.update(prefix.as_bytes());
        mac.update(b"\n");
        mac.update(expires.to_string().as_bytes());
        mac
    }

    /// Cookie value `<expires>.<hex mac>` bound to `prefix`.
    pub fn sign(&self, prefix: &str, expires: i64) -> String {
        format!("{expires}.{}", hex::encode(self.mac(prefix, expires).finalize().into_bytes()))
    }

    pub fn verify(&self, prefix: &str, value: &str, now: i64) -> bool {
        let Some((exp, sig)) = value.split_once('.') else { return false };
        let (Ok(expires), Ok(sig)) = (exp.parse::<i64>(), hex::decode(sig)) else { return false };
        expires > now && self.mac(prefix, expires).verify_slice(&sig).is_ok()
    }

    /// `Set-Cookie` header value scoped to the route path.
    pub fn set_cookie(&self, prefix: &str, expires: i64) -> String {
        format!("{COOKIE_NAME}={}; Path={prefix}; HttpOnly; SameSite=Lax", self.sign(prefix, expires))
    }
}

/// All values of the route cookie in a `Cookie` header.
pub fn cookie_values(header: &str) -> impl Iterator<Item = &str> {
    header.split(';').filter_map(|kv| {
        let (k, v) = kv.trim().split_once('=')?;
        (k == COOKIE_NAME).then_some(v)
    })
}
