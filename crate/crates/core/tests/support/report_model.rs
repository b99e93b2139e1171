//! Model-based checker for report version allocation.

#![allow(dead_code)]

use std::collections::BTreeMap;

use hub_core::layout::tree_digest;
use hub_core::reports::{PublishRequest, SourceTree};
use hub_core::*;
use rand::Rng;

const NAMES: [&str; 3] = ["daily", "summary", "dash"];

#[derive(Debug, Clone)]
pub enum Op {
    Publish { name: usize, seed: u32 },
    DeleteVersion { name: usize, pick: usize },
    DeleteAll { name: usize },
}

pub fn random_ops<R: Rng>(rng: &mut R) -> Vec<Op> {
    let len = rng.random_range(1..=50);
    (0..len)
        .map(|_| {
            let name = rng.random_range(0..NAMES.len());
            match rng.random_range(0..10) {
                0..=5 => Op::Publish { name, seed: rng.random() },
                6..=8 => Op::DeleteVersion { name, pick: rng.random_range(0..8) },
                _ => Op::DeleteAll { name },
            }
        })
        .collect()
}

struct Series {
    allocated: u32,
    /// version → (index.html body, digest recorded at publish)
    live: BTreeMap<u32, (Vec<u8>, String)>,
}

/// Replays `ops` against a fresh hub and checks allocation, the latest
/// pointer and content immutability after every step.
pub fn check_sequence(root: &std::path::Path, ops: &[Op]) -> Result<(), String> {
    let hub = Hub::ephemeral(root, HubOptions::default());
    let alice = hub.register_user("alice", "a@x").map_err(|e| e.to_string())?.user_id;
    let project = hub.create_project(&alice, "p", Scope::Internal, "img").map_err(|e| e.to_string())?.project_id;
    let viewer = Viewer::User(alice.clone());
    let mut model: BTreeMap<usize, Series> = BTreeMap::new();
    let find = |hub: &Hub, name: usize| -> Option<Report> {
        hub.state().reports.values().find(|r| r.name == NAMES[name] && r.project_id == project).cloned()
    };

    for (step, op) in ops.iter().enumerate() {
        let fail = |msg: String| Err(format!("step {step} ({op:?}): {msg}"));
        match *op {
            Op::Publish { name, seed } => {
                let body = format!("<h1>{} {seed}</h1>", NAMES[name]).into_bytes();
                let files = BTreeMap::from([
                    ("index.html".to_string(), body.clone()),
                    ("data/v.txt".to_string(), seed.to_le_bytes().to_vec()),
                ]);
                let r = hub
                    .publish_report(
                        &alice,
                        PublishRequest {
                            project: project.clone(),
                            name: NAMES[name].into(),
                            source: SourceTree::Files(files),
                            kind: ReportKind::StaticBundle,
                            scope: Scope::Public,
                            password: None,
                        },
                    )
                    .map_err(|e| format!("step {step}: publish failed: {e}"))?;
                let series = model.entry(name).or_insert(Series { allocated: 0, live: BTreeMap::new() });
                series.allocated += 1;
                let v = r.latest_version().unwrap_or(0);
                if v != series.allocated {
                    return fail(format!("allocated v{v}, expected v{}", series.allocated));
                }
                series.live.insert(v, (body, r.versions[&v].content_digest.clone()));
            }
            Op::DeleteVersion { name, pick } => {
                let Some(series) = model.get_mut(&name) else { continue };
                let versions: Vec<u32> = series.live.keys().copied().collect();
                let v = versions[pick % versions.len()];
                let id = find(&hub, name).ok_or("series vanished")?.report_id;
                let d = hub.delete_report(&alice, &id, Some(v)).map_err(|e| e.to_string())?;
                series.live.remove(&v);
                if d.report_removed != series.live.is_empty() {
                    return fail("report_removed flag wrong".into());
                }
                if series.live.is_empty() {
                    model.remove(&name);
                }
            }
            Op::DeleteAll { name } => {
                let Some(r) = find(&hub, name) else { continue };
                hub.delete_report(&alice, &r.report_id, None).map_err(|e| e.to_string())?;
                model.remove(&name);
            }
        }

        for name in 0..NAMES.len() {
            let actual = find(&hub, name);
            let (Some(r), Some(series)) = (&actual, model.get(&name)) else {
                if actual.is_some() != model.contains_key(&name) {
                    return fail(format!("presence of {} differs from model", NAMES[name]));
                }
                continue;
            };
            if r.allocated != series.allocated {
                return fail(format!("allocated {} vs model {}", r.allocated, series.allocated));
            }
            let have: Vec<u32> = r.versions.keys().copied().collect();
            let want: Vec<u32> = series.live.keys().copied().collect();
            if have != want {
                return fail(format!("versions {have:?} vs model {want:?}"));
            }
            let latest = hub.open_report(&viewer, &r.report_id, None, None).map_err(|e| e.to_string())?;
            if Some(latest.version.version) != want.last().copied() {
                return fail(format!("latest v{} but max is {:?}", latest.version.version, want.last()));
            }
            for (v, (body, digest)) in &series.live {
                let opened = hub.open_report(&viewer, &r.report_id, Some(*v), None).map_err(|e| e.to_string())?;
                let on_disk = std::fs::read(opened.content_dir.join("index.html")).map_err(|e| e.to_string())?;
                if &on_disk != body {
                    return fail(format!("v{v} content changed"));
                }
                let now = tree_digest(&opened.content_dir).map_err(|e| e.to_string())?;
                if &now != digest || &opened.version.content_digest != digest {
                    return fail(format!("v{v} digest changed"));
                }
            }
        }
    }
    Ok(())
}
