//! Container records and their state machine. Driving actual workloads is
//! the runtime's job; this module only owns what the store records.

use std::collections::BTreeSet;

use chrono::Utc;

use crate::error::{Error, Result};
use crate::hub::Hub;
use crate::model::*;

#[derive(Debug, Clone, Default)]
pub struct NewContainer {
    pub name: String,
    pub image_ref: Option<String>,
    pub project_ids: Vec<ProjectId>,
    pub functional_volume_ids: Vec<VolumeId>,
}

/// Requested change of a container's recorded state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Transition {
    Starting,
    Running { upstream: String, route_prefix: String, workload_id: String },
    Stopping,
    Stopped,
    Failed { reason: String },
}

impl Transition {
    pub fn target(&self) -> ContainerState {
        match self {
            Transition::Starting => ContainerState::Starting,
            Transition::Running { .. } => ContainerState::Running,
            Transition::Stopping => ContainerState::Stopping,
            Transition::Stopped => ContainerState::Stopped,
            Transition::Failed { .. } => ContainerState::Failed,
        }
    }
}

pub fn notebook_route(id: &ContainerId) -> String {
    format!("/notebook/{id}")
}

impl Hub {
    pub fn create_container(&self, owner: &UserId, spec: NewContainer) -> Result<Container> {
        validate_name(&spec.name)?;
        self.store.transact(|s| {
            s.user(owner)?;
            let mut seen = BTreeSet::new();
            let mut projects = Vec::new();
            for pid in &spec.project_ids {
                let p = s.project(pid)?;
                if !p.is_member(owner) {
                    return Err(Error::NotMemberOfProject(pid.to_string()));
                }
                if seen.insert(pid.clone()) {
                    projects.push(pid.clone());
                }
            }
            for vid in &spec.functional_volume_ids {
                if s.volume(vid)?.kind != VolumeKind::Functional {
                    return Err(Error::InvalidVolume(format!(
                        "{vid} is a storage volume; attach it to a project instead"
                    )));
                }
            }
            let existing = s
                .containers
                .values()
                .filter(|c| &c.owner_id == owner && c.is_notebook())
                .count();
            if existing >= self.options.max_containers_per_user {
                return Err(Error::ContainerLimit(self.options.max_containers_per_user));
            }
            let image_ref = match (&spec.image_ref, projects.first()) {
                (Some(img), _) => img.clone(),
                (None, Some(pid)) => s.project(pid)?.image_ref.clone(),
                (None, None) => self.options.default_image.clone(),
            };
            let container = Container {
                container_id: ContainerId::generate(),
                owner_id: owner.clone(),
                name: spec.name.clone(),
                image_ref,
                purpose: ContainerPurpose::Notebook,
                attached_project_ids: projects,
                attached_functional_volume_ids: spec.functional_volume_ids.iter().cloned().collect(),
                state: ContainerState::Created,
                upstream_address: None,
                route_prefix: None,
                workload_id: None,
                last_error: None,
                created_at: Utc::now(),
            };
            s.containers.insert(container.container_id.clone(), container.clone());
            Ok(container)
        })
    }

    /// Finds or records the app container serving one report version.
    pub fn report_app_container(&self, report: &ReportId, version: u32) -> Result<Container> {
        self.store.transact(|s| {
            let purpose = ContainerPurpose::ReportApp { report_id: report.clone(), version };
            if let Some(c) = s.containers.values().find(|c| c.purpose == purpose) {
                return Ok(c.clone());
            }
            let r = s.report(report)?;
            if !r.versions.contains_key(&version) {
                return Err(Error::UnknownVersion(version));
            }
            let container = Container {
                container_id: ContainerId::generate(),
                owner_id: r.creator_id.clone(),
                name: format!("report-{}-v{version}", sanitize_name(&r.name)),
                image_ref: self.options.report_app_image.clone(),
                purpose,
                attached_project_ids: Vec::new(),
                attached_functional_volume_ids: BTreeSet::new(),
                state: ContainerState::Created,
                upstream_address: None,
                route_prefix: None,
                workload_id: None,
                last_error: None,
                created_at: Utc::now(),
            };
            s.containers.insert(container.container_id.clone(), container.clone());
            Ok(container)
        })
    }

    pub fn container(&self, id: &ContainerId) -> Result<Container> {
        self.state().container(id).cloned()
    }

    /// Notebook containers owned by `owner`.
    pub fn list_containers(&self, owner: &UserId) -> Vec<Container> {
        self.state()
            .containers
            .values()
            .filter(|c| &c.owner_id == owner && c.is_notebook())
            .cloned()
            .collect()
    }

    /// Applies a state transition. Upstream, route and workload are set
    /// exactly when the container enters `running` and cleared on any other state.
    pub fn transition_container(&self, id: &ContainerId, t: Transition) -> Result<Container> {
        self.store.transact(|s| {
            let c = s.container_mut(id)?;
            let next = t.target();
            if !c.state.can_transition_to(next) {
                return Err(Error::InvalidTransition {
                    from: c.state.to_string(),
                    to: next.to_string(),
                });
            }
            c.state = next;
            match t {
                Transition::Running { upstream, route_prefix, workload_id } => {
                    c.upstream_address = Some(upstream);
                    c.route_prefix = Some(route_prefix);
                    c.workload_id = Some(workload_id);
                    c.last_error = None;
                }
                Transition::Failed { reason } => {
                    c.upstream_address = None;
                    c.route_prefix = None;
                    c.last_error = Some(reason);
                }
                Transition::Starting => {
                    c.upstream_address = None;
                    c.route_prefix = None;
                    c.last_error = None;
                }
                Transition::Stopping => {
                    c.upstream_address = None;
                    c.route_prefix = None;
                }
                Transition::Stopped => {
                    c.upstream_address = None;
                    c.route_prefix = None;
                    c.workload_id = None;
                }
            }
            Ok(c.clone())
        })
    }

    /// Drops the record of a report app container (after its workload is gone).
    pub fn forget_container(&self, id: &ContainerId) -> Result<()> {
        self.store.transact(|s| {
            s.containers.remove(id);
            Ok(())
        })
    }
}
