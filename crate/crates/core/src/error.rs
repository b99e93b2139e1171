use thiserror::Error;

/// Broad classification used by the HTTP layer to pick a status code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    NotFound,
    Validation,
    Conflict,
    Forbidden,
    Internal,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown user {0}")]
    UnknownUser(String),
    #[error("unknown project {0}")]
    UnknownProject(String),
    #[error("unknown volume {0}")]
    UnknownVolume(String),
    #[error("unknown container {0}")]
    UnknownContainer(String),
    #[error("unknown report {0}")]
    UnknownReport(String),
    #[error("report has no version {0}")]
    UnknownVersion(u32),

    #[error("invalid username {0:?}")]
    InvalidUsername(String),
    #[error("invalid name {0:?}")]
    InvalidName(String),
    #[error("invalid volume: {0}")]
    InvalidVolume(String),
    #[error("invalid service binding: {0}")]
    InvalidBinding(String),
    #[error("the owner role cannot be granted")]
    CannotGrantOwner,
    #[error("report source tree is empty")]
    EmptySource,
    #[error("static bundle has no index document at its root")]
    MissingIndex,
    #[error("invalid source path {0:?}")]
    InvalidSourcePath(String),

    #[error("username {0:?} is already registered")]
    DuplicateUsername(String),
    #[error("a project named {0:?} already exists for this owner")]
    DuplicateProjectName(String),
    #[error("a {kind} volume named {name:?} already exists")]
    DuplicateVolumeName { kind: &'static str, name: String },
    #[error("folder label {0:?} is already in use")]
    DuplicateFolderLabel(String),
    #[error("no free clone name for {0:?}")]
    NameCollision(String),
    #[error("already a member of the project")]
    AlreadyMember,
    #[error("the project owner cannot leave the project")]
    OwnerCannotLeave,
    #[error("the project owner's role cannot be changed")]
    CannotModifyOwner,
    #[error("mount targets collide at {0}")]
    TargetCollision(String),
    #[error("container limit of {0} reached")]
    ContainerLimit(usize),
    #[error("container cannot go from {from} to {to}")]
    InvalidTransition { from: String, to: String },

    #[error("access denied")]
    AccessDenied,
    #[error("not authorized for this project")]
    NotAuthorized,
    #[error("not a member of the project")]
    NotMember,
    #[error("container owner is not a member of project {0}")]
    NotMemberOfProject(String),
    #[error("only the report creator may do this")]
    NotCreator,
    #[error("wrong or missing report password")]
    WrongPassword,
    #[error("storage volume ACL does not admit member {member} (volume {volume})")]
    VolumeAclViolation { volume: String, member: String },

    #[error("corrupt snapshot: {0}")]
    CorruptSnapshot(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        use Error::*;
        match self {
            UnknownUser(_) | UnknownProject(_) | UnknownVolume(_) | UnknownContainer(_)
            | UnknownReport(_) | UnknownVersion(_) => ErrorKind::NotFound,
            InvalidUsername(_) | InvalidName(_) | InvalidVolume(_) | InvalidBinding(_)
            | CannotGrantOwner | EmptySource | MissingIndex | InvalidSourcePath(_) => {
                ErrorKind::Validation
            }
            DuplicateUsername(_) | DuplicateProjectName(_) | DuplicateVolumeName { .. }
            | DuplicateFolderLabel(_) | NameCollision(_) | AlreadyMember | OwnerCannotLeave
            | CannotModifyOwner | TargetCollision(_) | ContainerLimit(_)
            | InvalidTransition { .. } | VolumeAclViolation { .. } => ErrorKind::Conflict,
            AccessDenied | NotAuthorized | NotMember | NotMemberOfProject(_) | NotCreator
            | WrongPassword => ErrorKind::Forbidden,
            CorruptSnapshot(_) | Io(_) => ErrorKind::Internal,
        }
    }

    /// Stable machine-readable code, part of the public API contract.
    pub fn code(&self) -> &'static str {
        use Error::*;
        match self {
            UnknownUser(_) => "unknown_user",
            UnknownProject(_) => "unknown_project",
            UnknownVolume(_) => "unknown_volume",
            UnknownContainer(_) => "unknown_container",
            UnknownReport(_) => "unknown_report",
            UnknownVersion(_) => "unknown_version",
            InvalidUsername(_) => "invalid_username",
            InvalidName(_) => "invalid_name",
            InvalidVolume(_) => "invalid_volume",
            InvalidBinding(_) => "invalid_binding",
            CannotGrantOwner => "cannot_grant_owner",
            EmptySource => "empty_source",
            MissingIndex => "missing_index",
            InvalidSourcePath(_) => "invalid_source_path",
            DuplicateUsername(_) => "duplicate_username",
            DuplicateProjectName(_) => "duplicate_project_name",
            DuplicateVolumeName { .. } => "duplicate_volume_name",
            DuplicateFolderLabel(_) => "duplicate_folder_label",
            NameCollision(_) => "name_collision",
            AlreadyMember => "already_member",
            OwnerCannotLeave => "owner_cannot_leave",
            CannotModifyOwner => "cannot_modify_owner",
            TargetCollision(_) => "target_collision",
            ContainerLimit(_) => "container_limit",
            InvalidTransition { .. } => "invalid_transition",
            AccessDenied => "access_denied",
            NotAuthorized => "not_authorized",
            NotMember => "not_member",
            NotMemberOfProject(_) => "not_member_of_project",
            NotCreator => "not_creator",
            WrongPassword => "wrong_password",
            VolumeAclViolation { .. } => "volume_acl_violation",
            CorruptSnapshot(_) => "corrupt_snapshot",
            Io(_) => "io_error",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
