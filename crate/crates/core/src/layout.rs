//! Host-side directory layout under the storage root.
//!
//! ```text
//! <root>/users/<username>
//! <root>/projects/<pid>/share
//! <root>/projects/<pid>/workdir/<username>
//! <root>/projects/<pid>/prepare/<username>
//! <root>/reports/<rid>/v<n>
//! <root>/volumes/<kind>/<name>
//! <root>/services/<username>/<label>
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::model::{ProjectId, ReportId, VolumeKind};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    root: PathBuf,
}

impl Layout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Layout { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Resolves a root-relative path recorded in the store.
    pub fn resolve(&self, relative: &str) -> PathBuf {
        self.root.join(relative)
    }

    pub fn source(&self, relative: &str) -> String {
        self.resolve(relative).to_string_lossy().into_owned()
    }

    pub fn snapshot_file(&self) -> PathBuf {
        self.root.join("state.json")
    }

    pub fn home(username: &str) -> String {
        format!("users/{username}")
    }

    pub fn project_share(pid: &ProjectId) -> String {
        format!("projects/{pid}/share")
    }

    pub fn project_workdir(pid: &ProjectId, username: &str) -> String {
        format!("projects/{pid}/workdir/{username}")
    }

    pub fn project_prepare(pid: &ProjectId, username: &str) -> String {
        format!("projects/{pid}/prepare/{username}")
    }

    pub fn report_version(rid: &ReportId, version: u32) -> String {
        format!("reports/{rid}/v{version}")
    }

    pub fn report_dir(rid: &ReportId) -> String {
        format!("reports/{rid}")
    }

    pub fn volume(kind: VolumeKind, sanitized_name: &str) -> String {
        format!("volumes/{}/{sanitized_name}", kind.as_str())
    }

    pub fn service_folder(username: &str, sanitized_label: &str) -> String {
        format!("services/{username}/{sanitized_label}")
    }

    pub fn staging(&self) -> PathBuf {
        self.root.join("staging")
    }
}

/// Checks a client-supplied relative path: no absolute paths, no `..`, no empty segments.
pub fn check_relative(path: &str) -> Result<()> {
    let ok = !path.is_empty()
        && !path.starts_with('/')
        && !path.contains('\\')
        && path.split('/').all(|seg| !seg.is_empty() && seg != "." && seg != "..");
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidSourcePath(path.to_owned()))
    }
}

/// Recursively copies regular files and directories from `from` into `to`.
/// Symlinks are skipped so a tree cannot smuggle in references outside itself.
pub fn copy_tree(from: &Path, to: &Path) -> Result<u64> {
    fs::create_dir_all(to)?;
    let mut copied = 0;
    for entry in walkdir::WalkDir::new(from).follow_links(false).min_depth(1) {
        let entry = entry.map_err(|e| Error::Io(e.into()))?;
        let rel = entry.path().strip_prefix(from).expect("walkdir yields children of root");
        let dest = to.join(rel);
        let ft = entry.file_type();
        if ft.is_dir() {
            fs::create_dir_all(&dest)?;
        } else if ft.is_file() {
            fs::copy(entry.path(), &dest)?;
            copied += 1;
        }
    }
    Ok(copied)
}

/// Lists regular files under `root` as sorted `/`-separated relative paths.
pub fn list_files(root: &Path) -> Result<Vec<String>> {
    let mut files = Vec::new();
    for entry in walkdir::WalkDir::new(root).follow_links(false).min_depth(1) {
        let entry = entry.map_err(|e| Error::Io(e.into()))?;
        if entry.file_type().is_file() {
            let rel = entry.path().strip_prefix(root).expect("child of root");
            let parts: Vec<_> = rel.components().map(|c| c.as_os_str().to_string_lossy()).collect();
            files.push(parts.join("/"));
        }
    }
    files.sort();
    Ok(files)
}

/// SHA-256 over every (relative path, length, bytes) triple in sorted path order.
pub fn tree_digest(root: &Path) -> Result<String> {
    let mut hasher = Sha256::new();
    for rel in list_files(root)? {
        let bytes = fs::read(root.join(&rel))?;
        hasher.update(rel.as_bytes());
        hasher.update([0u8]);
        hasher.update((bytes.len() as u64).to_be_bytes());
        hasher.update(&bytes);
    }
    Ok(hex::encode(hasher.finalize()))
}
