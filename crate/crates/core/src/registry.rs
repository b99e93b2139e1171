//! Local user registry, group table, volumes and service bindings.

use std::collections::BTreeSet;

use chrono::Utc;

use crate::error::{Error, Result};
use crate::hub::Hub;
use crate::layout::Layout;
use crate::ldif;
use crate::model::*;

impl Hub {
    /// Registers a user with the next numeric id (`1000 + registered count`).
    pub fn register_user(&self, username: &str, email: &str) -> Result<User> {
        if !is_valid_username(username) {
            return Err(Error::InvalidUsername(username.to_owned()));
        }
        self.store.transact(|s| {
            if s.user_by_name(username).is_some() {
                return Err(Error::DuplicateUsername(username.to_owned()));
            }
            let user = User {
                user_id: UserId::generate(),
                username: username.to_owned(),
                email: email.to_owned(),
                numeric_id: NUMERIC_ID_BASE + s.users.len() as u32,
                created_at: Utc::now(),
            };
            s.users.insert(user.user_id.clone(), user.clone());
            Ok(user)
        })
    }

    pub fn user(&self, id: &UserId) -> Result<User> {
        self.state().user(id).cloned()
    }

    pub fn user_by_name(&self, username: &str) -> Result<User> {
        self.state()
            .user_by_name(username)
            .cloned()
            .ok_or_else(|| Error::UnknownUser(username.to_owned()))
    }

    /// All users, ascending by numeric id.
    pub fn list_users(&self) -> Vec<User> {
        let mut users: Vec<User> = self.state().users.values().cloned().collect();
        users.sort_by_key(|u| u.numeric_id);
        users
    }

    pub fn export_ldif(&self, base_dn: &str) -> String {
        ldif::export(self.state().users.values(), base_dn)
    }

    /// Replaces the membership of a named group in the static group table.
    pub fn set_group(&self, group: &str, members: &[UserId]) -> Result<()> {
        validate_name(group)?;
        self.store.transact(|s| {
            for m in members {
                s.user(m)?;
            }
            s.groups.insert(group.to_owned(), members.iter().cloned().collect());
            Ok(())
        })
    }

    pub fn create_volume(
        &self,
        name: &str,
        kind: VolumeKind,
        maintainer: Option<UserId>,
        acl: BTreeSet<AclEntry>,
    ) -> Result<Volume> {
        validate_name(name)?;
        match kind {
            VolumeKind::Functional if maintainer.is_none() => {
                return Err(Error::InvalidVolume("functional volume needs a maintainer".into()))
            }
            VolumeKind::Functional if !acl.is_empty() => {
                return Err(Error::InvalidVolume("functional volumes carry no ACL".into()))
            }
            VolumeKind::Storage if maintainer.is_some() => {
                return Err(Error::InvalidVolume("storage volumes have no maintainer".into()))
            }
            _ => {}
        }
        let sanitized = sanitize_name(name);
        self.store.transact(|s| {
            if let Some(m) = &maintainer {
                s.user(m)?;
            }
            for entry in &acl {
                if let AclEntry::User(u) = entry {
                    s.user(u)?;
                }
            }
            if s.volumes.values().any(|v| v.kind == kind && sanitize_name(&v.name) == sanitized) {
                return Err(Error::DuplicateVolumeName { kind: kind.as_str(), name: name.to_owned() });
            }
            let volume = Volume {
                volume_id: VolumeId::generate(),
                name: name.to_owned(),
                kind,
                maintainer_id: maintainer,
                acl,
                backing_path: Layout::volume(kind, &sanitized),
            };
            s.volumes.insert(volume.volume_id.clone(), volume.clone());
            Ok(volume)
        })
    }

    pub fn list_volumes(&self) -> Vec<Volume> {
        self.state().volumes.values().cloned().collect()
    }

    pub fn add_binding(
        &self,
        user: &UserId,
        service_kind: ServiceKind,
        endpoint: &str,
        credential: Credential,
        folder_label: &str,
    ) -> Result<ServiceBinding> {
        let parsed = url::Url::parse(endpoint)
            .map_err(|e| Error::InvalidBinding(format!("endpoint: {e}")))?;
        if !matches!(parsed.scheme(), "http" | "https" | "ssh" | "git") {
            return Err(Error::InvalidBinding(format!("unsupported scheme {}", parsed.scheme())));
        }
        credential.validate()?;
        validate_name(folder_label)?;
        let label = sanitize_name(folder_label);
        self.store.transact(|s| {
            s.user(user)?;
            if s.bindings
                .values()
                .any(|b| &b.user_id == user && sanitize_name(&b.folder_label) == label)
            {
                return Err(Error::DuplicateFolderLabel(folder_label.to_owned()));
            }
            let binding = ServiceBinding {
                binding_id: BindingId::generate(),
                user_id: user.clone(),
                service_kind,
                endpoint: endpoint.to_owned(),
                credential,
                folder_label: folder_label.to_owned(),
            };
            s.bindings.insert(binding.binding_id.clone(), binding.clone());
            Ok(binding)
        })
    }

    pub fn list_bindings(&self, user: &UserId) -> Vec<ServiceBinding> {
        self.state().bindings.values().filter(|b| &b.user_id == user).cloned().collect()
    }
}
