//! Domain core of the collaborative analytics hub: users and their stable
//! numeric ids, projects and collaboration rules, volumes, containers,
//! versioned reports, and the mount planner that turns all of it into the
//! filesystem view of a container.

pub mod collab;
pub mod containers;
pub mod error;
pub mod hub;
pub mod layout;
pub mod ldif;
pub mod model;
pub mod mounts;
pub mod registry;
pub mod reports;
pub mod store;

pub use error::{Error, ErrorKind, Result};
pub use hub::{Hub, HubOptions};
pub use layout::Layout;
pub use model::*;
pub use store::{State, Store};
