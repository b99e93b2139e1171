//! Randomized hub states and an independent rule-table mount oracle.
//!
//! The oracle enumerates every object in the state and asks, for each one,
//! whether the rule table admits it into the container view. It shares no
//! code with the planner beyond the data types.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use chrono::{TimeZone, Utc};
use hub_core::mounts::{Mode, MountEntry};
use hub_core::*;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;

pub struct Fixture {
    pub state: State,
    pub container: ContainerId,
}

const PROJECT_NAMES: &[&str] = &["p1", "genomics", "Data Lake", "course", "p2", "ml", "P1"];
const VOLUME_NAMES: &[&str] = &["seq", "refdb", "tools", "Samples", "cohort"];
const REPORT_NAMES: &[&str] = &["daily", "summary", "Figures", "dash"];
const LABELS: &[&str] = &["git", "seafile", "gitlab", "Cloud"];
const USERNAMES: &[&str] = &["alice", "bob", "carol", "dave", "erin"];

fn ts() -> Timestamp {
    Utc.with_ymd_and_hms(2024, 1, 1, 0, 0, 0).unwrap()
}

fn pick_scope<R: Rng>(rng: &mut R) -> Scope {
    *Scope::ALL.choose(rng).unwrap()
}

/// ≤5 users, ≤4 projects, ≤4 volumes, plus reports, bindings, groups and
/// one notebook container owned by a random user.
pub fn random_fixture<R: Rng>(rng: &mut R) -> Fixture {
    let mut s = State::default();

    let n_users = rng.random_range(1..=5);
    let users: Vec<UserId> = (0..n_users)
        .map(|i| {
            let id = UserId::from(format!("u{i}"));
            s.users.insert(
                id.clone(),
                User {
                    user_id: id.clone(),
                    username: USERNAMES[i].into(),
                    email: format!("{}@x", USERNAMES[i]),
                    numeric_id: 1000 + i as u32,
                    created_at: ts(),
                },
            );
            id
        })
        .collect();

    for g in ["lab", "clinic"] {
        let members: BTreeSet<UserId> = users.iter().filter(|_| rng.random_bool(0.4)).cloned().collect();
        s.groups.insert(g.into(), members);
    }

    let n_volumes = rng.random_range(0..=4);
    let mut vnames: Vec<&str> = VOLUME_NAMES.to_vec();
    vnames.shuffle(rng);
    for (i, name) in vnames.iter().take(n_volumes).enumerate() {
        let id = VolumeId::from(format!("v{i}"));
        let kind = if rng.random_bool(0.5) { VolumeKind::Storage } else { VolumeKind::Functional };
        let (maintainer_id, acl) = match kind {
            VolumeKind::Functional => (Some(users.choose(rng).unwrap().clone()), BTreeSet::new()),
            VolumeKind::Storage => {
                let mut acl = BTreeSet::new();
                if rng.random_bool(0.6) {
                    for u in &users {
                        if rng.random_bool(0.4) {
                            acl.insert(AclEntry::User(u.clone()));
                        }
                    }
                    if rng.random_bool(0.3) {
                        acl.insert(AclEntry::Group(["lab", "clinic", "nobody"].choose(rng).unwrap().to_string()));
                    }
                }
                (None, acl)
            }
        };
        s.volumes.insert(
            id.clone(),
            Volume {
                volume_id: id,
                name: name.to_string(),
                kind,
                maintainer_id,
                acl,
                backing_path: format!("volumes/{}/{}", kind.as_str(), name.to_lowercase()),
            },
        );
    }
    let storage_ids: Vec<VolumeId> =
        s.volumes.values().filter(|v| v.kind == VolumeKind::Storage).map(|v| v.volume_id.clone()).collect();
    let functional_ids: Vec<VolumeId> =
        s.volumes.values().filter(|v| v.kind == VolumeKind::Functional).map(|v| v.volume_id.clone()).collect();

    let n_projects = rng.random_range(0..=4);
    let mut pnames: Vec<&str> = PROJECT_NAMES.to_vec();
    pnames.shuffle(rng);
    let mut projects = Vec::new();
    for (i, name) in pnames.iter().take(n_projects).enumerate() {
        let id = ProjectId::from(format!("p{i}"));
        let owner = users.choose(rng).unwrap().clone();
        let mut members = BTreeMap::from([(owner.clone(), Role::Owner)]);
        for u in &users {
            if *u != owner && rng.random_bool(0.5) {
                let role = if rng.random_bool(0.3) { Role::Administrator } else { Role::Collaborator };
                members.insert(u.clone(), role);
            }
        }
        let attached_volume_ids = storage_ids.iter().filter(|_| rng.random_bool(0.5)).cloned().collect();
        s.projects.insert(
            id.clone(),
            Project {
                project_id: id.clone(),
                name: name.to_string(),
                scope: pick_scope(rng),
                members,
                image_ref: "img".into(),
                attached_volume_ids,
                share_readonly_for_collaborators: rng.random_bool(0.5),
                created_at: ts(),
            },
        );
        projects.push(id);
    }

    let mut rcount = 0;
    for pid in &projects {
        let p = s.projects[pid].clone();
        let member_ids: Vec<UserId> = p.members.keys().cloned().collect();
        let mut rnames: Vec<&str> = REPORT_NAMES.to_vec();
        rnames.shuffle(rng);
        for name in rnames.iter().take(rng.random_range(0..=2)) {
            let id = ReportId::from(format!("r{rcount}"));
            rcount += 1;
            let allocated = rng.random_range(1..=3u32);
            let mut versions = BTreeMap::new();
            for v in 1..=allocated {
                if v == allocated || rng.random_bool(0.7) {
                    versions.insert(
                        v,
                        ReportVersion {
                            version: v,
                            kind: ReportKind::StaticBundle,
                            publisher_id: member_ids[0].clone(),
                            content_root: format!("reports/{id}/v{v}"),
                            content_digest: "0".repeat(64),
                            created_at: ts(),
                        },
                    );
                }
            }
            s.reports.insert(
                id.clone(),
                Report {
                    report_id: id,
                    name: name.to_string(),
                    project_id: pid.clone(),
                    creator_id: member_ids.choose(rng).unwrap().clone(),
                    scope: pick_scope(rng),
                    password_digest: rng.random_bool(0.25).then(|| "sha256$00$00".to_string()),
                    allocated,
                    versions,
                    created_at: ts(),
                },
            );
        }
    }

    let mut bcount = 0;
    for u in &users {
        let mut labels: Vec<&str> = LABELS.to_vec();
        labels.shuffle(rng);
        for label in labels.iter().take(rng.random_range(0..=2)) {
            let id = BindingId::from(format!("b{bcount}"));
            bcount += 1;
            s.bindings.insert(
                id.clone(),
                ServiceBinding {
                    binding_id: id,
                    user_id: u.clone(),
                    service_kind: ServiceKind::VersionControl,
                    endpoint: "https://git.example".into(),
                    credential: Credential::Token("t".repeat(24)),
                    folder_label: label.to_string(),
                },
            );
        }
    }

    let owner = users.choose(rng).unwrap().clone();
    let mut attached: Vec<ProjectId> = projects
        .iter()
        .filter(|pid| s.projects[*pid].members.contains_key(&owner) && rng.random_bool(0.7))
        .cloned()
        .collect();
    // occasionally violate the membership precondition
    if rng.random_bool(0.05) {
        if let Some(foreign) = projects.iter().find(|pid| !s.projects[*pid].members.contains_key(&owner)) {
            attached.push(foreign.clone());
        }
    }
    attached.shuffle(rng);
    let fvols = functional_ids.iter().filter(|_| rng.random_bool(0.6)).cloned().collect();
    let cid = ContainerId::from("c0");
    s.containers.insert(
        cid.clone(),
        Container {
            container_id: cid.clone(),
            owner_id: owner,
            name: "nb".into(),
            image_ref: "img".into(),
            purpose: ContainerPurpose::Notebook,
            attached_project_ids: attached,
            attached_functional_volume_ids: fvols,
            state: ContainerState::Created,
            upstream_address: None,
            route_prefix: None,
            workload_id: None,
            last_error: None,
            created_at: ts(),
        },
    );
    Fixture { state: s, container: cid }
}

fn oracle_sanitize(name: &str) -> String {
    let mut out = String::new();
    for c in name.chars() {
        let lower = c.to_ascii_lowercase();
        let keep = matches!(lower, 'a'..='z' | '0'..='9' | '_' | '-');
        out.push(if keep { lower } else { '_' });
    }
    out
}

#[derive(Debug, PartialEq, Eq)]
pub enum OracleOutcome {
    Plan { entries: Vec<MountEntry>, numeric_id: u32 },
    NotMember,
    Collision,
}

/// Brute-force rule table: every candidate mount derivable from the state is
/// enumerated and kept or dropped by its rule.
pub fn oracle(state: &State, root: &Path, container: &ContainerId) -> OracleOutcome {
    let c = &state.containers[container];
    let owner = &state.users[&c.owner_id];
    let u = owner.username.clone();
    let src = |rel: String| root.join(rel).to_string_lossy().into_owned();
    let attached: BTreeSet<&ProjectId> = c.attached_project_ids.iter().collect();

    for pid in &attached {
        if !state.projects[*pid].members.contains_key(&owner.user_id) {
            return OracleOutcome::NotMember;
        }
    }

    let mut candidates: Vec<MountEntry> = Vec::new();
    candidates.push(MountEntry { source: src(format!("users/{u}")), target: format!("/home/{u}"), mode: Mode::Rw });

    for (pid, p) in &state.projects {
        if !attached.contains(pid) {
            continue;
        }
        let pn = oracle_sanitize(&p.name);
        let role = p.members[&owner.user_id];
        candidates.push(MountEntry {
            source: src(format!("projects/{pid}/workdir/{u}")),
            target: format!("/home/{u}/workdir/{pn}"),
            mode: Mode::Rw,
        });
        let share_ro = p.share_readonly_for_collaborators && role == Role::Collaborator;
        candidates.push(MountEntry {
            source: src(format!("projects/{pid}/share")),
            target: format!("/home/{u}/share/{pn}"),
            mode: if share_ro { Mode::Ro } else { Mode::Rw },
        });
        candidates.push(MountEntry {
            source: src(format!("projects/{pid}/prepare/{u}")),
            target: format!("/home/{u}/reports/{pn}/prepare"),
            mode: Mode::Rw,
        });
    }

    for (rid, r) in &state.reports {
        let pid = &r.project_id;
        let is_creator = r.creator_id == owner.user_id;
        let visible = match r.scope {
            Scope::Private => is_creator,
            Scope::Internal | Scope::Public => true,
        };
        let unlocked = r.password_digest.is_none() || is_creator;
        if !(attached.contains(pid) && visible && unlocked) {
            continue;
        }
        let pn = oracle_sanitize(&state.projects[pid].name);
        for v in r.versions.keys() {
            candidates.push(MountEntry {
                source: src(format!("reports/{rid}/v{v}")),
                target: format!("/home/{u}/reports/{pn}/{}/v{v}", oracle_sanitize(&r.name)),
                mode: Mode::Ro,
            });
        }
    }

    for b in state.bindings.values() {
        if b.user_id != owner.user_id {
            continue;
        }
        let l = oracle_sanitize(&b.folder_label);
        candidates.push(MountEntry {
            source: src(format!("services/{u}/{l}")),
            target: format!("/home/{u}/service/{l}"),
            mode: Mode::Rw,
        });
    }

    for (vid, v) in &state.volumes {
        let vn = oracle_sanitize(&v.name);
        match v.kind {
            VolumeKind::Functional => {
                if c.attached_functional_volume_ids.contains(vid) {
                    let rw = v.maintainer_id.as_ref() == Some(&owner.user_id);
                    candidates.push(MountEntry {
                        source: src(v.backing_path.clone()),
                        target: format!("/vol/{vn}"),
                        mode: if rw { Mode::Rw } else { Mode::Ro },
                    });
                }
            }
            VolumeKind::Storage => {
                let reachable = attached.iter().any(|pid| state.projects[*pid].attached_volume_ids.contains(vid));
                let admitted = v.acl.is_empty()
                    || v.acl.iter().any(|e| match e {
                        AclEntry::User(x) => *x == owner.user_id,
                        AclEntry::Group(g) => state.groups.get(g).is_some_and(|m| m.contains(&owner.user_id)),
                    });
                if reachable && admitted {
                    candidates.push(MountEntry {
                        source: src(v.backing_path.clone()),
                        target: format!("/mnt/{vn}"),
                        mode: Mode::Ro,
                    });
                }
            }
        }
    }

    candidates.sort_by(|a, b| a.target.cmp(&b.target));
    let home = format!("/home/{u}");
    for (i, a) in candidates.iter().enumerate() {
        for (j, b) in candidates.iter().enumerate() {
            if i == j {
                continue;
            }
            let nested = a.target != home && b.target.starts_with(&format!("{}/", a.target));
            if a.target == b.target || nested {
                return OracleOutcome::Collision;
            }
        }
    }
    OracleOutcome::Plan { entries: candidates, numeric_id: owner.numeric_id }
}

/// Maps the planner's result onto the oracle's outcome space.
pub fn planner_outcome(state: &State, root: &Path, container: &ContainerId) -> OracleOutcome {
    match hub_core::mounts::plan_mounts(state, &Layout::new(root), container) {
        Ok(plan) => OracleOutcome::Plan { entries: plan.entries, numeric_id: plan.numeric_id },
        Err(Error::NotMemberOfProject(_)) => OracleOutcome::NotMember,
        Err(Error::TargetCollision(_)) => OracleOutcome::Collision,
        Err(e) => panic!("unexpected planner error: {e}"),
    }
}
