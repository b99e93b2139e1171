//! Versioned report publishing.
//!
//! A report is identified by `(project, name)`. Each publish allocates the
//! next version number and copies the prepared tree into an immutable
//! directory; old versions stay readable until explicitly deleted.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use chrono::Utc;
use rand::RngCore;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::hub::Hub;
use crate::layout::{self, check_relative, copy_tree, Layout};
use crate::model::*;
use crate::store::State;

/// Folder name reserved for staging inside `~/reports/<project>/`.
pub const PREPARE_FOLDER: &str = "prepare";

const INDEX_DOCUMENTS: [&str; 2] = ["index.html", "index.htm"];

#[derive(Debug, Clone)]
pub enum SourceTree {
    /// An existing directory on the host, e.g. the publisher's prepare folder.
    Dir(PathBuf),
    /// In-memory files keyed by relative path.
    Files(BTreeMap<String, Vec<u8>>),
}

#[derive(Debug, Clone)]
pub struct PublishRequest {
    pub project: ProjectId,
    pub name: String,
    pub source: SourceTree,
    pub kind: ReportKind,
    pub scope: Scope,
    /// Replaces the report password when given; `None` keeps the current one.
    pub password: Option<String>,
}

/// Listing entry; never exposes the password digest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportSummary {
    pub report_id: ReportId,
    pub name: String,
    pub project_id: ProjectId,
    pub creator_id: UserId,
    pub scope: Scope,
    pub password_protected: bool,
    pub latest_version: u32,
    pub versions: Vec<u32>,
    pub kind: ReportKind,
}

impl From<&Report> for ReportSummary {
    fn from(r: &Report) -> Self {
        let latest = r.latest().expect("stored reports have at least one version");
        ReportSummary {
            report_id: r.report_id.clone(),
            name: r.name.clone(),
            project_id: r.project_id.clone(),
            creator_id: r.creator_id.clone(),
            scope: r.scope,
            password_protected: r.password_digest.is_some(),
            latest_version: latest.version,
            versions: r.versions.keys().copied().collect(),
            kind: latest.kind,
        }
    }
}

#[derive(Debug, Clone)]
pub struct OpenedReport {
    pub summary: ReportSummary,
    pub version: ReportVersion,
    pub content_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Deletion {
    pub removed_versions: Vec<u32>,
    pub report_removed: bool,
}

/// `private` → creator only, `internal` → any logged-in user, `public` → everyone.
pub fn report_visible(report: &Report, viewer: &Viewer) -> bool {
    match (report.scope, viewer) {
        (Scope::Public, _) => true,
        (Scope::Internal, Viewer::User(_)) => true,
        (Scope::Private, Viewer::User(id)) => *id == report.creator_id,
        _ => false,
    }
}

pub fn hash_password(password: &str) -> String {
    let mut salt = [0u8; 16];
    rand::rng().fill_bytes(&mut salt);
    let digest = Sha256::new().chain_update(salt).chain_update(password.as_bytes()).finalize();
    format!("sha256${}${}", hex::encode(salt), hex::encode(digest))
}

pub fn verify_password(stored: &str, candidate: &str) -> bool {
    let mut parts = stored.split('$');
    let (Some("sha256"), Some(salt), Some(expected), None) =
        (parts.next(), parts.next(), parts.next(), parts.next())
    else {
        return false;
    };
    let (Ok(salt), Ok(expected)) = (hex::decode(salt), hex::decode(expected)) else {
        return false;
    };
    let digest = Sha256::new().chain_update(&salt).chain_update(candidate.as_bytes()).finalize();
    digest.len() == expected.len()
        && digest.iter().zip(&expected).fold(0u8, |acc, (a, b)| acc | (a ^ b)) == 0
}

fn set_read_only(root: &Path) -> Result<()> {
    for entry in walkdir::WalkDir::new(root).min_depth(1) {
        let entry = entry.map_err(|e| Error::Io(e.into()))?;
        if entry.file_type().is_file() {
            let mut perms = entry.metadata().map_err(|e| Error::Io(e.into()))?.permissions();
            perms.set_readonly(true);
            fs::set_permissions(entry.path(), perms)?;
        }
    }
    Ok(())
}

fn materialize(source: &SourceTree, dest: &Path) -> Result<()> {
    match source {
        SourceTree::Dir(dir) => {
            if !dir.is_dir() {
                return Err(Error::EmptySource);
            }
            copy_tree(dir, dest)?;
        }
        SourceTree::Files(files) => {
            fs::create_dir_all(dest)?;
            for (rel, bytes) in files {
                check_relative(rel)?;
                let path = dest.join(rel);
                if let Some(parent) = path.parent() {
                    fs::create_dir_all(parent)?;
                }
                fs::write(path, bytes)?;
            }
        }
    }
    Ok(())
}

fn find_series<'a>(state: &'a State, project: &ProjectId, name: &str) -> Option<&'a Report> {
    state.reports.values().find(|r| &r.project_id == project && r.name == name)
}

impl Hub {
    pub fn publish_report(&self, actor: &UserId, req: PublishRequest) -> Result<Report> {
        validate_name(&req.name)?;
        if sanitize_name(&req.name) == PREPARE_FOLDER {
            return Err(Error::InvalidName(req.name.clone()));
        }
        {
            let s = self.state();
            s.user(actor)?;
            if !s.project(&req.project)?.is_member(actor) {
                return Err(Error::NotMember);
            }
        }

        let staging = self.layout.staging().join(uuid::Uuid::new_v4().simple().to_string());
        let result = self.stage_and_commit(actor, &req, &staging);
        if staging.exists() {
            let _ = fs::remove_dir_all(&staging);
        }
        result
    }

    fn stage_and_commit(&self, actor: &UserId, req: &PublishRequest, staging: &Path) -> Result<Report> {
        materialize(&req.source, staging)?;
        let files = layout::list_files(staging)?;
        if files.is_empty() {
            return Err(Error::EmptySource);
        }
        if req.kind == ReportKind::StaticBundle
            && !INDEX_DOCUMENTS.iter().any(|idx| files.iter().any(|f| f == idx))
        {
            return Err(Error::MissingIndex);
        }
        set_read_only(staging)?;
        let digest = layout::tree_digest(staging)?;
        let password_digest = req.password.as_deref().map(hash_password);

        self.store.transact(|s| {
            if !s.project(&req.project)?.is_member(actor) {
                return Err(Error::NotMember);
            }
            let existing = find_series(s, &req.project, &req.name).map(|r| r.report_id.clone());
            let sanitized = sanitize_name(&req.name);
            if existing.is_none()
                && s.reports
                    .values()
                    .any(|r| r.project_id == req.project && sanitize_name(&r.name) == sanitized)
            {
                return Err(Error::TargetCollision(format!("reports/{sanitized}")));
            }
            let now = Utc::now();
            let report_id = match existing {
                Some(id) => {
                    let r = s.report(&id)?;
                    if &r.creator_id != actor {
                        return Err(Error::NotCreator);
                    }
                    id
                }
                None => {
                    let id = ReportId::generate();
                    s.reports.insert(
                        id.clone(),
                        Report {
                            report_id: id.clone(),
                            name: req.name.clone(),
                            project_id: req.project.clone(),
                            creator_id: actor.clone(),
                            scope: req.scope,
                            password_digest: None,
                            allocated: 0,
                            versions: BTreeMap::new(),
                            created_at: now,
                        },
                    );
                    id
                }
            };
            let report = s.report_mut(&report_id)?;
            let version = report.allocated + 1;
            let content_root = Layout::report_version(&report_id, version);
            let final_dir = self.layout.resolve(&content_root);
            if let Some(parent) = final_dir.parent() {
                fs::create_dir_all(parent)?;
            }
            fs::rename(staging, &final_dir)?;
            report.allocated = version;
            report.scope = req.scope;
            if let Some(pd) = &password_digest {
                report.password_digest = Some(pd.clone());
            }
            report.versions.insert(
                version,
                ReportVersion {
                    version,
                    kind: req.kind,
                    publisher_id: actor.clone(),
                    content_root,
                    content_digest: digest.clone(),
                    created_at: now,
                },
            );
            Ok(report.clone())
        })
    }

    pub fn report(&self, id: &ReportId) -> Result<Report> {
        self.state().report(id).cloned()
    }

    pub fn list_reports(&self, viewer: &Viewer) -> Vec<ReportSummary> {
        self.state()
            .reports
            .values()
            .filter(|r| report_visible(r, viewer))
            .map(ReportSummary::from)
            .collect()
    }

    /// Resolves a visible report version. Password-protected reports need the
    /// password from everyone except their creator.
    pub fn open_report(
        &self,
        viewer: &Viewer,
        id: &ReportId,
        version: Option<u32>,
        password: Option<&str>,
    ) -> Result<OpenedReport> {
        let s = self.state();
        let r = s.report(id)?;
        if !report_visible(r, viewer) {
            return Err(Error::AccessDenied);
        }
        if let Some(stored) = &r.password_digest {
            let is_creator = viewer.user_id() == Some(&r.creator_id);
            if !is_creator && !password.is_some_and(|p| verify_password(stored, p)) {
                return Err(Error::WrongPassword);
            }
        }
        let v = match version {
            Some(n) => r.versions.get(&n).ok_or(Error::UnknownVersion(n))?,
            None => r.latest().expect("stored reports have at least one version"),
        };
        Ok(OpenedReport {
            summary: ReportSummary::from(r),
            content_dir: self.layout.resolve(&v.content_root),
            version: v.clone(),
        })
    }

    pub fn set_report_scope(&self, actor: &UserId, id: &ReportId, scope: Scope) -> Result<ReportSummary> {
        self.store.transact(|s| {
            let r = s.report_mut(id)?;
            if &r.creator_id != actor {
                return Err(Error::NotCreator);
            }
            r.scope = scope;
            Ok(ReportSummary::from(&*r))
        })
    }

    pub fn set_report_password(
        &self,
        actor: &UserId,
        id: &ReportId,
        password: Option<&str>,
    ) -> Result<ReportSummary> {
        let digest = password.map(hash_password);
        self.store.transact(|s| {
            let r = s.report_mut(id)?;
            if &r.creator_id != actor {
                return Err(Error::NotCreator);
            }
            r.password_digest = digest;
            Ok(ReportSummary::from(&*r))
        })
    }

    /// Deletes one version, or all of them when `version` is `None`. Removing
    /// the last version removes the report itself.
    pub fn delete_report(&self, actor: &UserId, id: &ReportId, version: Option<u32>) -> Result<Deletion> {
        let (deletion, dirs) = self.store.transact(|s| {
            let r = s.report_mut(id)?;
            if &r.creator_id != actor {
                return Err(Error::NotCreator);
            }
            let removed: Vec<ReportVersion> = match version {
                Some(n) => vec![r.versions.remove(&n).ok_or(Error::UnknownVersion(n))?],
                None => std::mem::take(&mut r.versions).into_values().collect(),
            };
            let report_removed = r.versions.is_empty();
            if report_removed {
                s.reports.remove(id);
            }
            Ok((
                Deletion { removed_versions: removed.iter().map(|v| v.version).collect(), report_removed },
                removed.into_iter().map(|v| v.content_root).collect::<Vec<_>>(),
            ))
        })?;
        for dir in dirs {
            let _ = fs::remove_dir_all(self.layout.resolve(&dir));
        }
        if deletion.report_removed {
            let _ = fs::remove_dir_all(self.layout.resolve(&Layout::report_dir(id)));
        }
        Ok(deletion)
    }
}
