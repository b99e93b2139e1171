//! Domain types shared by every hub module.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Timestamp = DateTime<Utc>;

macro_rules! id_type {
    ($(#[$meta:meta])* $name:ident, $prefix:literal) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(String);

        impl $name {
            pub fn generate() -> Self {
                Self(format!("{}{}", $prefix, uuid::Uuid::new_v4().simple()))
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl From<&str> for $name {
            fn from(s: &str) -> Self {
                Self(s.to_owned())
            }
        }

        impl From<String> for $name {
            fn from(s: String) -> Self {
                Self(s)
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }
    };
}

id_type!(UserId, "u");
id_type!(ProjectId, "p");
id_type!(VolumeId, "v");
id_type!(
    /// Also used verbatim in the `/notebook/<id>` route prefix.
    ContainerId,
    "c"
);
id_type!(ReportId, "r");
id_type!(BindingId, "b");

/// First numeric id handed out; below this live host system accounts.
pub const NUMERIC_ID_BASE: u32 = 1000;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct User {
    pub user_id: UserId,
    pub username: String,
    pub email: String,
    pub numeric_id: u32,
    pub created_at: Timestamp,
}

/// `[a-z][a-z0-9_-]{0,31}`
pub fn is_valid_username(name: &str) -> bool {
    let bytes = name.as_bytes();
    match bytes.split_first() {
        Some((first, rest)) => {
            first.is_ascii_lowercase()
                && rest.len() <= 31
                && rest
                    .iter()
                    .all(|b| b.is_ascii_lowercase() || b.is_ascii_digit() || *b == b'_' || *b == b'-')
        }
        None => false,
    }
}

/// Display names for projects, volumes, reports and folder labels.
pub fn validate_name(name: &str) -> Result<()> {
    let ok = !name.trim().is_empty()
        && name.chars().count() <= 64
        && !name.contains('/')
        && !name.chars().any(char::is_control)
        && name != "."
        && name != "..";
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidName(name.to_owned()))
    }
}

/// Maps a display name onto `[a-z0-9_-]` for use as a path component.
pub fn sanitize_name(name: &str) -> String {
    name.chars()
        .map(|c| {
            let c = c.to_ascii_lowercase();
            if c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_' || c == '-' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scope {
    Private,
    Internal,
    Public,
}

impl Scope {
    pub const ALL: [Scope; 3] = [Scope::Private, Scope::Internal, Scope::Public];

    pub fn as_str(self) -> &'static str {
        match self {
            Scope::Private => "private",
            Scope::Internal => "internal",
            Scope::Public => "public",
        }
    }
}

impl fmt::Display for Scope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Scope {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "private" => Ok(Scope::Private),
            "internal" => Ok(Scope::Internal),
            "public" => Ok(Scope::Public),
            other => Err(Error::InvalidName(other.to_owned())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Owner,
    Administrator,
    Collaborator,
}

impl Role {
    /// Owners and administrators may configure a project.
    pub fn can_configure(self) -> bool {
        matches!(self, Role::Owner | Role::Administrator)
    }
}

/// Who is looking at a listing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Viewer {
    Anonymous,
    User(UserId),
}

impl Viewer {
    pub fn user_id(&self) -> Option<&UserId> {
        match self {
            Viewer::Anonymous => None,
            Viewer::User(id) => Some(id),
        }
    }
}

impl From<Option<UserId>> for Viewer {
    fn from(id: Option<UserId>) -> Self {
        id.map_or(Viewer::Anonymous, Viewer::User)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Project {
    pub project_id: ProjectId,
    pub name: String,
    pub scope: Scope,
    pub members: BTreeMap<UserId, Role>,
    pub image_ref: String,
    pub attached_volume_ids: BTreeSet<VolumeId>,
    pub share_readonly_for_collaborators: bool,
    pub created_at: Timestamp,
}

impl Project {
    pub fn owner(&self) -> &UserId {
        self.members
            .iter()
            .find(|(_, role)| **role == Role::Owner)
            .map(|(id, _)| id)
            .expect("project invariant: exactly one owner")
    }

    pub fn role_of(&self, user: &UserId) -> Option<Role> {
        self.members.get(user).copied()
    }

    pub fn is_member(&self, user: &UserId) -> bool {
        self.members.contains_key(user)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VolumeKind {
    Storage,
    Functional,
}

impl VolumeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            VolumeKind::Storage => "storage",
            VolumeKind::Functional => "functional",
        }
    }
}

/// Storage-volume ACL entry: a user or a group from the static group table.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AclEntry {
    User(UserId),
    Group(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Volume {
    pub volume_id: VolumeId,
    pub name: String,
    pub kind: VolumeKind,
    pub maintainer_id: Option<UserId>,
    pub acl: BTreeSet<AclEntry>,
    /// Relative to the storage root.
    pub backing_path: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ContainerState {
    Created,
    Starting,
    Running,
    Stopping,
    Stopped,
    Failed,
}

impl ContainerState {
    pub fn as_str(self) -> &'static str {
        match self {
            ContainerState::Created => "created",
            ContainerState::Starting => "starting",
            ContainerState::Running => "running",
            ContainerState::Stopping => "stopping",
            ContainerState::Stopped => "stopped",
            ContainerState::Failed => "failed",
        }
    }

    /// created→starting→running→stopping→stopped, restart from stopped,
    /// any→failed, and failed→stopping so a failed container can be cleaned up.
    pub fn can_transition_to(self, next: ContainerState) -> bool {
        use ContainerState::*;
        matches!(
            (self, next),
            (Created, Starting)
                | (Stopped, Starting)
                | (Starting, Running)
                | (Starting, Stopping)
                | (Running, Stopping)
                | (Failed, Stopping)
                | (Stopping, Stopped)
                | (_, Failed)
        )
    }
}

impl fmt::Display for ContainerState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ContainerPurpose {
    Notebook,
    ReportApp { report_id: ReportId, version: u32 },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Container {
    pub container_id: ContainerId,
    pub owner_id: UserId,
    pub name: String,
    pub image_ref: String,
    pub purpose: ContainerPurpose,
    pub attached_project_ids: Vec<ProjectId>,
    pub attached_functional_volume_ids: BTreeSet<VolumeId>,
    pub state: ContainerState,
    pub upstream_address: Option<String>,
    pub route_prefix: Option<String>,
    pub workload_id: Option<String>,
    pub last_error: Option<String>,
    pub created_at: Timestamp,
}

impl Container {
    pub fn is_notebook(&self) -> bool {
        self.purpose == ContainerPurpose::Notebook
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportKind {
    StaticBundle,
    ServedApp,
}

/// One immutable published snapshot of a report.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportVersion {
    pub version: u32,
    pub kind: ReportKind,
    pub publisher_id: UserId,
    /// Relative to the storage root.
    pub content_root: String,
    pub content_digest: String,
    pub created_at: Timestamp,
}

/// A named report within a project together with all its retained versions.
/// Scope and password apply to the report as a whole.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Report {
    pub report_id: ReportId,
    pub name: String,
    pub project_id: ProjectId,
    pub creator_id: UserId,
    pub scope: Scope,
    pub password_digest: Option<String>,
    /// Highest version ever allocated; allocation is 1..=allocated without gaps.
    pub allocated: u32,
    pub versions: BTreeMap<u32, ReportVersion>,
    pub created_at: Timestamp,
}

impl Report {
    pub fn latest(&self) -> Option<&ReportVersion> {
        self.versions.values().next_back()
    }

    pub fn latest_version(&self) -> Option<u32> {
        self.versions.keys().next_back().copied()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ServiceKind {
    VersionControl,
    CloudSync,
}

/// Tokens and public keys only; there is deliberately no password variant.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum Credential {
    Token(String),
    PublicKey(String),
}

const PUBLIC_KEY_TYPES: &[&str] = &[
    "ssh-ed25519",
    "ssh-rsa",
    "ecdsa-sha2-nistp256",
    "ecdsa-sha2-nistp384",
    "ecdsa-sha2-nistp521",
    "sk-ssh-ed25519@openssh.com",
];

impl Credential {
    pub fn validate(&self) -> Result<()> {
        match self {
            Credential::Token(t) => {
                let ok = t.len() >= 20
                    && t.len() <= 4096
                    && t.bytes().all(|b| b.is_ascii_alphanumeric() || b"-_.~+/=".contains(&b));
                if ok {
                    Ok(())
                } else {
                    Err(Error::InvalidBinding(
                        "token must be at least 20 characters of token alphabet".into(),
                    ))
                }
            }
            Credential::PublicKey(k) => {
                use base64::Engine as _;
                let mut parts = k.split_whitespace();
                let (Some(kind), Some(body)) = (parts.next(), parts.next()) else {
                    return Err(Error::InvalidBinding("public key must be '<type> <base64>'".into()));
                };
                if !PUBLIC_KEY_TYPES.contains(&kind) {
                    return Err(Error::InvalidBinding(format!("unsupported key type {kind}")));
                }
                base64::engine::general_purpose::STANDARD
                    .decode(body)
                    .map_err(|_| Error::InvalidBinding("public key body is not base64".into()))?;
                Ok(())
            }
        }
    }

    pub fn redacted(&self) -> Credential {
        match self {
            Credential::Token(_) => Credential::Token("***".into()),
            Credential::PublicKey(k) => Credential::PublicKey(k.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ServiceBinding {
    pub binding_id: BindingId,
    pub user_id: UserId,
    pub service_kind: ServiceKind,
    pub endpoint: String,
    pub credential: Credential,
    pub folder_label: String,
}

/// A private workdir left behind when a member leaves a project.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArchivedWorkdir {
    pub user_id: UserId,
    pub project_id: ProjectId,
    pub path: String,
    pub archived_at: Timestamp,
}
