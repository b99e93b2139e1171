//! Compiles a container and its owner's memberships into a mount plan.
//!
//! Container view for user `u`:
//!
//! | target                                  | mode                         |
//! |-----------------------------------------|------------------------------|
//! | `/home/u`                               | rw                           |
//! | `/home/u/workdir/<project>`             | rw                           |
//! | `/home/u/share/<project>`               | rw, ro for read-only collaborators |
//! | `/home/u/reports/<project>/<report>/vN` | ro                           |
//! | `/home/u/reports/<project>/prepare`     | rw                           |
//! | `/home/u/service/<label>`               | rw                           |
//! | `/vol/<functional volume>`              | rw for maintainer, else ro   |
//! | `/mnt/<storage volume>`                 | ro, only if the ACL admits u |

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::layout::Layout;
use crate::model::*;
use crate::reports::{report_visible, PREPARE_FOLDER};
use crate::store::State;

/// Mount point of the report tree inside a report app container.
pub const REPORT_APP_TARGET: &str = "/srv/report";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Rw,
    Ro,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Rw => "rw",
            Mode::Ro => "ro",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct MountEntry {
    pub source: String,
    pub target: String,
    pub mode: Mode,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MountPlan {
    pub entries: Vec<MountEntry>,
    pub numeric_id: u32,
}

impl MountPlan {
    /// The wire form consumed by runtime drivers: an ordered JSON array of
    /// `{source,target,mode}`.
    pub fn entries_json(&self) -> String {
        serde_json::to_string(&self.entries).expect("mount entries serialize")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    NonAbsoluteTarget(String),
    NonNormalizedTarget(String),
    DuplicateTarget(String),
    NestedTarget { parent: String, child: String },
    Unordered { before: String, after: String },
    WriteEscalation(String),
    ReservedNumericId(u32),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NonAbsoluteTarget(t) => write!(f, "non-absolute target: {t}"),
            Violation::NonNormalizedTarget(t) => write!(f, "non-normalized target: {t}"),
            Violation::DuplicateTarget(t) => write!(f, "duplicate target: {t}"),
            Violation::NestedTarget { parent, child } => {
                write!(f, "nested target: {child} under {parent}")
            }
            Violation::Unordered { before, after } => {
                write!(f, "unordered targets: {before} before {after}")
            }
            Violation::WriteEscalation(s) => write!(f, "source mounted both ro and rw: {s}"),
            Violation::ReservedNumericId(n) => write!(f, "numeric id {n} below {NUMERIC_ID_BASE}"),
        }
    }
}

fn is_normalized(target: &str) -> bool {
    target.len() > 1
        && !target.ends_with('/')
        && target[1..].split('/').all(|seg| !seg.is_empty() && seg != "." && seg != "..")
}

fn is_home_root(target: &str) -> bool {
    let mut segs = target[1..].split('/');
    segs.next() == Some("home") && segs.next().is_some() && segs.next().is_none()
}

fn is_under(parent: &str, child: &str) -> bool {
    child.len() > parent.len() && child.starts_with(parent) && child.as_bytes()[parent.len()] == b'/'
}

/// Re-checks every plan invariant. Pure; never fails, only reports.
pub fn validate_plan(plan: &MountPlan) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut seen = BTreeSet::new();
    for e in &plan.entries {
        if !e.target.starts_with('/') {
            out.push(Violation::NonAbsoluteTarget(e.target.clone()));
        } else if !is_normalized(&e.target) {
            out.push(Violation::NonNormalizedTarget(e.target.clone()));
        }
        if !seen.insert(e.target.as_str()) {
            out.push(Violation::DuplicateTarget(e.target.clone()));
        }
    }
    for pair in plan.entries.windows(2) {
        if pair[0].target > pair[1].target {
            out.push(Violation::Unordered {
                before: pair[0].target.clone(),
                after: pair[1].target.clone(),
            });
        }
    }
    for a in &plan.entries {
        if a.target.starts_with('/') && is_home_root(&a.target) {
            continue;
        }
        for b in &plan.entries {
            if is_under(&a.target, &b.target) {
                out.push(Violation::NestedTarget { parent: a.target.clone(), child: b.target.clone() });
            }
        }
    }
    let mut modes: BTreeMap<&str, BTreeSet<Mode>> = BTreeMap::new();
    for e in &plan.entries {
        modes.entry(e.source.as_str()).or_default().insert(e.mode);
    }
    for (source, m) in modes {
        if m.len() > 1 {
            out.push(Violation::WriteEscalation(source.to_owned()));
        }
    }
    if plan.numeric_id < NUMERIC_ID_BASE {
        out.push(Violation::ReservedNumericId(plan.numeric_id));
    }
    out
}

struct Builder<'a> {
    layout: &'a Layout,
    entries: BTreeMap<String, MountEntry>,
}

impl Builder<'_> {
    fn add(&mut self, source_rel: &str, target: String, mode: Mode) -> Result<()> {
        let entry = MountEntry { source: self.layout.source(source_rel), target: target.clone(), mode };
        if self.entries.insert(target.clone(), entry).is_some() {
            return Err(Error::TargetCollision(target));
        }
        Ok(())
    }

    fn finish(self, numeric_id: u32) -> Result<MountPlan> {
        let plan = MountPlan { entries: self.entries.into_values().collect(), numeric_id };
        // nested targets from clashing sanitized names surface here
        if let Some(v) = validate_plan(&plan).into_iter().next() {
            return Err(Error::TargetCollision(v.to_string()));
        }
        Ok(plan)
    }
}

/// Compiles the plan for a notebook container from a consistent state snapshot.
pub fn plan_mounts(state: &State, layout: &Layout, container: &ContainerId) -> Result<MountPlan> {
    let c = state.container(container)?;
    if let ContainerPurpose::ReportApp { report_id, version } = &c.purpose {
        return plan_report_app(state, layout, c, report_id, *version);
    }
    let owner = state.user(&c.owner_id)?;
    let user = owner.username.as_str();
    let home = format!("/home/{user}");
    let me = Viewer::User(owner.user_id.clone());
    let mut b = Builder { layout, entries: BTreeMap::new() };

    b.add(&Layout::home(user), home.clone(), Mode::Rw)?;

    for pid in &c.attached_project_ids {
        if !state.project(pid)?.is_member(&owner.user_id) {
            return Err(Error::NotMemberOfProject(pid.to_string()));
        }
    }

    let mut storage = BTreeSet::new();
    for pid in &c.attached_project_ids {
        let p = state.project(pid)?;
        let role = p.role_of(&owner.user_id).ok_or_else(|| Error::NotMemberOfProject(pid.to_string()))?;
        let pname = sanitize_name(&p.name);

        b.add(&Layout::project_workdir(pid, user), format!("{home}/workdir/{pname}"), Mode::Rw)?;

        let share_mode = if p.share_readonly_for_collaborators && role == Role::Collaborator {
            Mode::Ro
        } else {
            Mode::Rw
        };
        b.add(&Layout::project_share(pid), format!("{home}/share/{pname}"), share_mode)?;

        for r in state.reports.values().filter(|r| &r.project_id == pid) {
            let locked = r.password_digest.is_some() && r.creator_id != owner.user_id;
            if !report_visible(r, &me) || locked {
                continue;
            }
            let rname = sanitize_name(&r.name);
            for v in r.versions.keys() {
                b.add(
                    &Layout::report_version(&r.report_id, *v),
                    format!("{home}/reports/{pname}/{rname}/v{v}"),
                    Mode::Ro,
                )?;
            }
        }
        b.add(
            &Layout::project_prepare(pid, user),
            format!("{home}/reports/{pname}/{PREPARE_FOLDER}"),
            Mode::Rw,
        )?;

        storage.extend(p.attached_volume_ids.iter().cloned());
    }

    for binding in state.bindings.values().filter(|x| x.user_id == owner.user_id) {
        let label = sanitize_name(&binding.folder_label);
        b.add(&Layout::service_folder(user, &label), format!("{home}/service/{label}"), Mode::Rw)?;
    }

    for vid in &c.attached_functional_volume_ids {
        let v = state.volume(vid)?;
        let mode = if v.maintainer_id.as_ref() == Some(&owner.user_id) { Mode::Rw } else { Mode::Ro };
        b.add(&v.backing_path, format!("/vol/{}", sanitize_name(&v.name)), mode)?;
    }

    for vid in &storage {
        let v = state.volume(vid)?;
        if v.kind == VolumeKind::Storage && state.acl_admits(v, &owner.user_id) {
            b.add(&v.backing_path, format!("/mnt/{}", sanitize_name(&v.name)), Mode::Ro)?;
        }
    }

    b.finish(owner.numeric_id)
}

fn plan_report_app(
    state: &State,
    layout: &Layout,
    c: &Container,
    report: &ReportId,
    version: u32,
) -> Result<MountPlan> {
    let r = state.report(report)?;
    let v = r.versions.get(&version).ok_or(Error::UnknownVersion(version))?;
    let owner = state.user(&c.owner_id)?;
    let mut b = Builder { layout, entries: BTreeMap::new() };
    b.add(&v.content_root, REPORT_APP_TARGET.to_owned(), Mode::Ro)?;
    b.finish(owner.numeric_id)
}
