//! Mutable prefix → upstream table with copy-on-write updates.

use std::collections::BTreeMap;
use std::sync::{Arc, RwLock};

use chrono::Utc;
use hub_core::Timestamp;
use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RouteEntry {
    pub prefix: String,
    pub upstream: String,
    pub created_at: Timestamp,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid route prefix {0:?}")]
pub struct InvalidPrefix(pub String);

/// A prefix is `/seg(/seg)*` with unreserved characters only; `.` and `..`
/// segments, empty segments and a trailing slash are rejected.
pub fn validate_prefix(prefix: &str) -> Result<(), InvalidPrefix> {
    let bad = || Err(InvalidPrefix(prefix.to_owned()));
    let Some(rest) = prefix.strip_prefix('/') else { return bad() };
    if rest.is_empty() {
        return bad();
    }
    for seg in rest.split('/') {
        let unreserved = seg.bytes().all(|b| b.is_ascii_alphanumeric() || matches!(b, b'-' | b'.' | b'_' | b'~'));
        if seg.is_empty() || seg == "." || seg == ".." || !unreserved {
            return bad();
        }
    }
    Ok(())
}

#[derive(Debug, Default)]
struct Table {
    version: u64,
    entries: Arc<BTreeMap<String, RouteEntry>>,
}

/// Readers take a cheap `Arc` clone; writers build a new map and swap it in,
/// so a resolve never sees a half-applied update.
#[derive(Debug, Default)]
pub struct RouteTable {
    inner: RwLock<Table>,
}

impl RouteTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&self, prefix: &str, upstream: &str) -> Result<(), InvalidPrefix> {
        validate_prefix(prefix)?;
        let entry = RouteEntry { prefix: prefix.to_owned(), upstream: upstream.to_owned(), created_at: Utc::now() };
        let mut t = self.inner.write().expect("route table poisoned");
        let mut next = (*t.entries).clone();
        next.insert(prefix.to_owned(), entry);
        t.entries = Arc::new(next);
        t.version += 1;
        Ok(())
    }

    /// Idempotent. Requests already forwarded keep their upstream connection.
    pub fn remove(&self, prefix: &str) {
        let mut t = self.inner.write().expect("route table poisoned");
        if !t.entries.contains_key(prefix) {
            return;
        }
        let mut next = (*t.entries).clone();
        next.remove(prefix);
        t.entries = Arc::new(next);
        t.version += 1;
    }

    /// Longest registered prefix of `path` that ends on a segment boundary.
    pub fn resolve(&self, path: &str) -> Option<RouteEntry> {
        let entries = self.snapshot().1;
        let boundaries = path.match_indices('/').map(|(i, _)| i).skip(1).chain(std::iter::once(path.len()));
        let candidates: Vec<&str> = boundaries.map(|i| &path[..i]).collect();
        candidates.into_iter().rev().find_map(|p| entries.get(p).cloned())
    }

    pub fn get(&self, prefix: &str) -> Option<RouteEntry> {
        self.snapshot().1.get(prefix).cloned()
    }

    /// Version counter and entries, read together.
    pub fn snapshot(&self) -> (u64, Arc<BTreeMap<String, RouteEntry>>) {
        let t = self.inner.read().expect("route table poisoned");
        (t.version, t.entries.clone())
    }

    pub fn entries(&self) -> Vec<RouteEntry> {
        self.snapshot().1.values().cloned().collect()
    }

    pub fn len(&self) -> usize {
        self.snapshot().1.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
