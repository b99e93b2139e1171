//! Reverse proxy in front of running containers.

mod cookie;
mod forward;
mod routes;

pub use cookie::{cookie_values, RouteSigner, COOKIE_NAME};
pub use forward::{serve, ProxyState};
pub use routes::{validate_prefix, InvalidPrefix, RouteEntry, RouteTable};
