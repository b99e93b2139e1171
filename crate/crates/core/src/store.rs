//! Transactional in-memory state with write-through JSON snapshots.
//!
//! Every committed transaction produces a new immutable [`State`] generation.
//! Readers take an `Arc` to the current generation and never block writers for
//! longer than a pointer swap. When the store is backed by a file, the new
//! generation is written (tmp file + rename) before it becomes visible, so a
//! process killed at any point restarts from the last acknowledged mutation.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use serde::{Deserialize, Serialize};
use serde_json::value::RawValue;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::model::*;

pub const SNAPSHOT_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct State {
    pub users: BTreeMap<UserId, User>,
    pub groups: BTreeMap<String, BTreeSet<UserId>>,
    pub projects: BTreeMap<ProjectId, Project>,
    pub volumes: BTreeMap<VolumeId, Volume>,
    pub containers: BTreeMap<ContainerId, Container>,
    pub reports: BTreeMap<ReportId, Report>,
    pub bindings: BTreeMap<BindingId, ServiceBinding>,
    pub archived_workdirs: Vec<ArchivedWorkdir>,
}

impl State {
    pub fn user(&self, id: &UserId) -> Result<&User> {
        self.users.get(id).ok_or_else(|| Error::UnknownUser(id.to_string()))
    }

    pub fn user_by_name(&self, username: &str) -> Option<&User> {
        self.users.values().find(|u| u.username == username)
    }

    pub fn project(&self, id: &ProjectId) -> Result<&Project> {
        self.projects.get(id).ok_or_else(|| Error::UnknownProject(id.to_string()))
    }

    pub fn project_mut(&mut self, id: &ProjectId) -> Result<&mut Project> {
        self.projects.get_mut(id).ok_or_else(|| Error::UnknownProject(id.to_string()))
    }

    pub fn volume(&self, id: &VolumeId) -> Result<&Volume> {
        self.volumes.get(id).ok_or_else(|| Error::UnknownVolume(id.to_string()))
    }

    pub fn container(&self, id: &ContainerId) -> Result<&Container> {
        self.containers.get(id).ok_or_else(|| Error::UnknownContainer(id.to_string()))
    }

    pub fn container_mut(&mut self, id: &ContainerId) -> Result<&mut Container> {
        self.containers.get_mut(id).ok_or_else(|| Error::UnknownContainer(id.to_string()))
    }

    pub fn report(&self, id: &ReportId) -> Result<&Report> {
        self.reports.get(id).ok_or_else(|| Error::UnknownReport(id.to_string()))
    }

    pub fn report_mut(&mut self, id: &ReportId) -> Result<&mut Report> {
        self.reports.get_mut(id).ok_or_else(|| Error::UnknownReport(id.to_string()))
    }

    /// Empty ACL admits everybody; otherwise the user must be listed directly
    /// or belong to a listed group.
    pub fn acl_admits(&self, volume: &Volume, user: &UserId) -> bool {
        volume.acl.is_empty()
            || volume.acl.iter().any(|entry| match entry {
                AclEntry::User(id) => id == user,
                AclEntry::Group(g) => self.groups.get(g).is_some_and(|m| m.contains(user)),
            })
    }
}

#[derive(Serialize)]
struct SnapshotOut<'a> {
    format_version: u32,
    generation: u64,
    state: &'a RawValue,
    checksum: String,
}

#[derive(Deserialize)]
struct SnapshotIn<'a> {
    format_version: u32,
    generation: u64,
    #[serde(borrow)]
    state: &'a RawValue,
    checksum: String,
}

fn checksum(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Serializes a state generation into the self-describing snapshot document.
pub fn encode_snapshot(state: &State, generation: u64) -> Result<Vec<u8>> {
    let body = serde_json::to_string(state).map_err(|e| Error::CorruptSnapshot(e.to_string()))?;
    let raw = RawValue::from_string(body).map_err(|e| Error::CorruptSnapshot(e.to_string()))?;
    let doc = SnapshotOut {
        format_version: SNAPSHOT_FORMAT_VERSION,
        generation,
        checksum: checksum(raw.get().as_bytes()),
        state: &raw,
    };
    let mut out = serde_json::to_vec(&doc).map_err(|e| Error::CorruptSnapshot(e.to_string()))?;
    out.push(b'\n');
    Ok(out)
}

/// Parses and verifies a snapshot document, returning the state and its generation.
pub fn decode_snapshot(bytes: &[u8]) -> Result<(State, u64)> {
    let doc: SnapshotIn<'_> =
        serde_json::from_slice(bytes).map_err(|e| Error::CorruptSnapshot(e.to_string()))?;
    if doc.format_version != SNAPSHOT_FORMAT_VERSION {
        return Err(Error::CorruptSnapshot(format!(
            "unsupported format version {}",
            doc.format_version
        )));
    }
    if checksum(doc.state.get().as_bytes()) != doc.checksum {
        return Err(Error::CorruptSnapshot("checksum mismatch".into()));
    }
    let state =
        serde_json::from_str(doc.state.get()).map_err(|e| Error::CorruptSnapshot(e.to_string()))?;
    Ok((state, doc.generation))
}

fn write_atomically(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let tmp = path.with_extension("tmp");
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

#[derive(Debug)]
struct Current {
    state: Arc<State>,
    generation: u64,
}

#[derive(Debug)]
pub struct Store {
    current: RwLock<Current>,
    writer: Mutex<()>,
    path: Option<PathBuf>,
}

impl Default for Store {
    fn default() -> Self {
        Self::in_memory()
    }
}

impl Store {
    pub fn in_memory() -> Self {
        Self::from_state(State::default(), 0, None)
    }

    fn from_state(state: State, generation: u64, path: Option<PathBuf>) -> Self {
        Store {
            current: RwLock::new(Current { state: Arc::new(state), generation }),
            writer: Mutex::new(()),
            path,
        }
    }

    /// Opens a file-backed store, restoring the snapshot if one exists.
    pub fn open(path: impl Into<PathBuf>) -> Result<Self> {
        let path = path.into();
        let (state, generation) = match fs::read(&path) {
            Ok(bytes) => decode_snapshot(&bytes)?,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => (State::default(), 0),
            Err(e) => return Err(e.into()),
        };
        Ok(Self::from_state(state, generation, Some(path)))
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    /// Consistent read-only view of the latest committed generation.
    pub fn snapshot(&self) -> Arc<State> {
        self.current.read().expect("store lock poisoned").state.clone()
    }

    pub fn generation(&self) -> u64 {
        self.current.read().expect("store lock poisoned").generation
    }

    /// Runs `f` against a private copy of the state and commits it only if `f`
    /// succeeds and the snapshot (when file-backed) was written.
    pub fn transact<T>(&self, f: impl FnOnce(&mut State) -> Result<T>) -> Result<T> {
        let _guard = self.writer.lock().expect("store writer poisoned");
        let (base, generation) = {
            let cur = self.current.read().expect("store lock poisoned");
            (cur.state.clone(), cur.generation)
        };
        let mut next = State::clone(&base);
        let out = f(&mut next)?;
        if next == *base {
            return Ok(out);
        }
        let generation = generation + 1;
        if let Some(path) = &self.path {
            write_atomically(path, &encode_snapshot(&next, generation)?)?;
        }
        *self.current.write().expect("store lock poisoned") =
            Current { state: Arc::new(next), generation };
        Ok(out)
    }

    /// Writes the current generation to `path`.
    pub fn persist_to(&self, path: &Path) -> Result<()> {
        let (state, generation) = {
            let cur = self.current.read().expect("store lock poisoned");
            (cur.state.clone(), cur.generation)
        };
        write_atomically(path, &encode_snapshot(&state, generation)?)
    }

    /// Replaces the current state with the snapshot at `path`.
    pub fn restore_from(&self, path: &Path) -> Result<()> {
        let (state, _) = decode_snapshot(&fs::read(path)?)?;
        self.transact(|s| {
            *s = state;
            Ok(())
        })
    }
}
