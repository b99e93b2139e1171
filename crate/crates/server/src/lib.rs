//! Runtime drivers, reverse proxy and HTTP API for the notebook hub.

pub mod api;
pub mod app;
pub mod auth;
pub mod config;
pub mod proxy;
pub mod runtime;

pub use app::{App, AppSettings, Listeners};
