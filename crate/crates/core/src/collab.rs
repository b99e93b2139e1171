//! Project lifecycle and collaboration rules.
//!
//! Owners and administrators configure a project; collaborators may only
//! leave it. Internal and public projects can be joined by any logged-in
//! user, and cloned by anyone who can see them.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;

use chrono::Utc;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hub::Hub;
use crate::layout::{copy_tree, Layout};
use crate::model::*;
use crate::store::State;

/// Clone names are tried as `name`, `name-2`, … `name-99`.
pub const MAX_CLONE_SUFFIX: u32 = 99;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProjectListing {
    #[serde(flatten)]
    pub project: Project,
    /// The viewer's role, when they are a member.
    pub role: Option<Role>,
    pub joinable: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProjectConfig {
    pub image_ref: Option<String>,
    #[serde(default)]
    pub attach_volumes: Vec<VolumeId>,
    #[serde(default)]
    pub detach_volumes: Vec<VolumeId>,
    pub share_readonly_for_collaborators: Option<bool>,
}

fn require_configurer(project: &Project, actor: &UserId) -> Result<()> {
    match project.role_of(actor) {
        Some(role) if role.can_configure() => Ok(()),
        _ => Err(Error::NotAuthorized),
    }
}

fn owned_names(state: &State, owner: &UserId) -> BTreeSet<String> {
    state
        .projects
        .values()
        .filter(|p| p.owner() == owner)
        .map(|p| p.name.clone())
        .collect()
}

fn validate_image(image_ref: &str) -> Result<()> {
    if image_ref.trim().is_empty() || image_ref.chars().any(char::is_whitespace) {
        Err(Error::InvalidName(image_ref.to_owned()))
    } else {
        Ok(())
    }
}

/// Whether `viewer` would see `project` in a listing, and if so whether it is
/// offered as joinable.
pub fn project_visibility(project: &Project, viewer: &Viewer) -> Option<bool> {
    match viewer {
        Viewer::Anonymous => (project.scope == Scope::Public).then_some(false),
        Viewer::User(id) if project.is_member(id) => Some(false),
        Viewer::User(_) => (project.scope != Scope::Private).then_some(true),
    }
}

impl Hub {
    pub fn create_project(
        &self,
        actor: &UserId,
        name: &str,
        scope: Scope,
        image_ref: &str,
    ) -> Result<Project> {
        validate_name(name)?;
        validate_image(image_ref)?;
        self.store.transact(|s| {
            s.user(actor)?;
            if owned_names(s, actor).contains(name) {
                return Err(Error::DuplicateProjectName(name.to_owned()));
            }
            let project = Project {
                project_id: ProjectId::generate(),
                name: name.to_owned(),
                scope,
                members: BTreeMap::from([(actor.clone(), Role::Owner)]),
                image_ref: image_ref.to_owned(),
                attached_volume_ids: BTreeSet::new(),
                share_readonly_for_collaborators: false,
                created_at: Utc::now(),
            };
            s.projects.insert(project.project_id.clone(), project.clone());
            Ok(project)
        })
    }

    pub fn project(&self, id: &ProjectId) -> Result<Project> {
        self.state().project(id).cloned()
    }

    /// New private project owned by `actor` with the source's image, volume
    /// attachments and share-folder contents. Members and workdirs are not copied.
    pub fn clone_project(&self, actor: &UserId, source: &ProjectId) -> Result<Project> {
        let snapshot = self.state();
        snapshot.user(actor)?;
        let src = snapshot.project(source)?;
        if !src.is_member(actor) && src.scope == Scope::Private {
            return Err(Error::AccessDenied);
        }
        // copy share contents first so a failed copy leaves no half-made project
        let new_id = ProjectId::generate();
        let from = self.layout.resolve(&Layout::project_share(source));
        let to = self.layout.resolve(&Layout::project_share(&new_id));
        if from.is_dir() {
            copy_tree(&from, &to)?;
        } else {
            fs::create_dir_all(&to)?;
        }
        let result = self.store.transact(|s| {
            let src = s.project(source)?.clone();
            if !src.is_member(actor) && src.scope == Scope::Private {
                return Err(Error::AccessDenied);
            }
            let taken = owned_names(s, actor);
            let name = std::iter::once(src.name.clone())
                .chain((2..=MAX_CLONE_SUFFIX).map(|n| format!("{}-{n}", src.name)))
                .find(|candidate| !taken.contains(candidate) && validate_name(candidate).is_ok())
                .ok_or_else(|| Error::NameCollision(src.name.clone()))?;
            let project = Project {
                project_id: new_id.clone(),
                name,
                scope: Scope::Private,
                members: BTreeMap::from([(actor.clone(), Role::Owner)]),
                image_ref: src.image_ref.clone(),
                attached_volume_ids: src.attached_volume_ids.clone(),
                share_readonly_for_collaborators: false,
                created_at: Utc::now(),
            };
            s.projects.insert(new_id.clone(), project.clone());
            Ok(project)
        });
        if result.is_err() {
            let _ = fs::remove_dir_all(self.layout.resolve(&format!("projects/{new_id}")));
        }
        result
    }

    /// Adds or re-roles a member. Repeating with the same role is a no-op.
    pub fn add_collaborator(
        &self,
        actor: &UserId,
        project: &ProjectId,
        user: &UserId,
        role: Role,
    ) -> Result<Project> {
        if role == Role::Owner {
            return Err(Error::CannotGrantOwner);
        }
        self.store.transact(|s| {
            s.user(user)?;
            let p = s.project_mut(project)?;
            require_configurer(p, actor)?;
            if p.role_of(user) == Some(Role::Owner) {
                return Err(Error::CannotModifyOwner);
            }
            p.members.insert(user.clone(), role);
            Ok(p.clone())
        })
    }

    pub fn join_project(&self, actor: &UserId, project: &ProjectId) -> Result<Project> {
        self.store.transact(|s| {
            s.user(actor)?;
            let p = s.project_mut(project)?;
            if p.is_member(actor) {
                return Err(Error::AlreadyMember);
            }
            if p.scope == Scope::Private {
                return Err(Error::AccessDenied);
            }
            p.members.insert(actor.clone(), Role::Collaborator);
            Ok(p.clone())
        })
    }

    /// Removes the actor's membership. Their workdir stays on disk and is
    /// recorded as archived; the project is detached from their containers
    /// (running ones keep their mounts until restarted).
    pub fn leave_project(&self, actor: &UserId, project: &ProjectId) -> Result<Project> {
        self.store.transact(|s| {
            let username = s.user(actor)?.username.clone();
            let p = s.project_mut(project)?;
            match p.role_of(actor) {
                None => return Err(Error::NotMember),
                Some(Role::Owner) => return Err(Error::OwnerCannotLeave),
                Some(_) => {}
            }
            p.members.remove(actor);
            let out = p.clone();
            s.archived_workdirs.push(ArchivedWorkdir {
                user_id: actor.clone(),
                project_id: project.clone(),
                path: Layout::project_workdir(project, &username),
                archived_at: Utc::now(),
            });
            for c in s.containers.values_mut().filter(|c| &c.owner_id == actor) {
                c.attached_project_ids.retain(|id| id != project);
            }
            Ok(out)
        })
    }

    pub fn configure_project(
        &self,
        actor: &UserId,
        project: &ProjectId,
        config: &ProjectConfig,
    ) -> Result<Project> {
        if let Some(image) = &config.image_ref {
            validate_image(image)?;
        }
        self.store.transact(|s| {
            let p = s.project(project)?;
            require_configurer(p, actor)?;
            for vid in &config.attach_volumes {
                let v = s.volume(vid)?;
                if v.kind != VolumeKind::Storage {
                    return Err(Error::InvalidVolume(format!(
                        "{} is a functional volume; attach it to a container instead",
                        v.name
                    )));
                }
                for member in p.members.keys() {
                    if !s.acl_admits(v, member) {
                        return Err(Error::VolumeAclViolation {
                            volume: v.name.clone(),
                            member: s.user(member)?.username.clone(),
                        });
                    }
                }
            }
            for vid in &config.detach_volumes {
                s.volume(vid)?;
            }
            let p = s.project_mut(project)?;
            if let Some(image) = &config.image_ref {
                p.image_ref = image.clone();
            }
            for vid in &config.detach_volumes {
                p.attached_volume_ids.remove(vid);
            }
            p.attached_volume_ids.extend(config.attach_volumes.iter().cloned());
            if let Some(flag) = config.share_readonly_for_collaborators {
                p.share_readonly_for_collaborators = flag;
            }
            Ok(p.clone())
        })
    }

    pub fn set_project_scope(
        &self,
        actor: &UserId,
        project: &ProjectId,
        scope: Scope,
    ) -> Result<Project> {
        self.store.transact(|s| {
            let p = s.project_mut(project)?;
            require_configurer(p, actor)?;
            p.scope = scope;
            Ok(p.clone())
        })
    }

    /// Member projects of any scope plus joinable internal/public ones;
    /// anonymous viewers see public projects only.
    pub fn list_projects(&self, viewer: &Viewer) -> Vec<ProjectListing> {
        self.state()
            .projects
            .values()
            .filter_map(|p| {
                project_visibility(p, viewer).map(|joinable| ProjectListing {
                    role: viewer.user_id().and_then(|id| p.role_of(id)),
                    project: p.clone(),
                    joinable,
                })
            })
            .collect()
    }
}
