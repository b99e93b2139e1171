//! Hub configuration: a TOML file plus environment overrides. Environment
//! variables win over the file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::Deserialize;

use crate::runtime::{EngineConfig, SimConfig, DEFAULT_API_VERSION};

pub const ENV_CONFIG: &str = "HUB_CONFIG";
pub const ENV_STORAGE_ROOT: &str = "HUB_STORAGE_ROOT";
pub const ENV_DRIVER: &str = "HUB_DRIVER";

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("invalid config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid value for {key}: {value}")]
    Value { key: &'static str, value: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DriverKind {
    Sim,
    Engine,
}

impl std::str::FromStr for DriverKind {
    type Err = ();
    fn from_str(s: &str) -> Result<Self, ()> {
        match s {
            "sim" => Ok(DriverKind::Sim),
            "engine" => Ok(DriverKind::Engine),
            _ => Err(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IdentityKind {
    Static,
    Signed,
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IdentityConfig {
    pub kind: IdentityKind,
    /// username → token, for the static provider.
    pub tokens: BTreeMap<String, String>,
    /// Shared secret for the signed provider.
    pub secret: Option<String>,
    /// Register unknown but authenticated users on first login.
    pub auto_provision: bool,
}

impl Default for IdentityConfig {
    fn default() -> Self {
        IdentityConfig { kind: IdentityKind::Static, tokens: BTreeMap::new(), secret: None, auto_provision: false }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RuntimeConfig {
    pub start_timeout_secs: u64,
    pub port_range_start: u16,
    pub port_range_end: u16,
    pub seed: u64,
    pub engine_socket: PathBuf,
    pub engine_api_version: String,
}

impl Default for RuntimeConfig {
    fn default() -> Self {
        let sim = SimConfig::default();
        RuntimeConfig {
            start_timeout_secs: 60,
            port_range_start: sim.port_start,
            port_range_end: sim.port_end,
            seed: sim.seed,
            engine_socket: "/var/run/docker.sock".into(),
            engine_api_version: DEFAULT_API_VERSION.into(),
        }
    }
}

impl RuntimeConfig {
    pub fn start_timeout(&self) -> Duration {
        Duration::from_secs(self.start_timeout_secs)
    }

    pub fn sim(&self) -> SimConfig {
        SimConfig { port_start: self.port_range_start, port_end: self.port_range_end, seed: self.seed }
    }

    pub fn engine(&self) -> EngineConfig {
        EngineConfig { socket: self.engine_socket.clone(), api_version: self.engine_api_version.clone() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub storage_root: PathBuf,
    pub driver: DriverKind,
    pub bind: String,
    pub api_port: u16,
    pub proxy_port: u16,
    pub session_ttl_secs: u64,
    pub max_containers_per_user: usize,
    pub default_image: String,
    pub report_app_image: String,
    pub require_route_cookie: bool,
    pub route_cookie_secret: Option<String>,
    /// Static assets served under `/ui/`.
    pub ui_dir: Option<PathBuf>,
    /// group name → usernames, applied at startup.
    pub groups: BTreeMap<String, Vec<String>>,
    pub identity: IdentityConfig,
    pub runtime: RuntimeConfig,
}

impl Default for Config {
    fn default() -> Self {
        let opts = hub_core::HubOptions::default();
        Config {
            storage_root: "hub-data".into(),
            driver: DriverKind::Sim,
            bind: "127.0.0.1".into(),
            api_port: 8000,
            proxy_port: 8001,
            session_ttl_secs: 12 * 3600,
            max_containers_per_user: opts.max_containers_per_user,
            default_image: opts.default_image,
            report_app_image: opts.report_app_image,
            require_route_cookie: true,
            route_cookie_secret: None,
            ui_dir: None,
            groups: BTreeMap::new(),
            identity: IdentityConfig::default(),
            runtime: RuntimeConfig::default(),
        }
    }
}

impl Config {
    /// Parses `text` (if any) and applies overrides from `env`.
    pub fn from_sources(text: Option<&str>, env: impl Fn(&str) -> Option<String>) -> Result<Config, ConfigError> {
        let mut config = match text {
            Some(t) => toml::from_str(t)?,
            None => Config::default(),
        };
        if let Some(root) = env(ENV_STORAGE_ROOT) {
            config.storage_root = root.into();
        }
        if let Some(driver) = env(ENV_DRIVER) {
            config.driver = driver.parse().map_err(|_| ConfigError::Value { key: ENV_DRIVER, value: driver })?;
        }
        Ok(config)
    }

    /// Loads `path`, else the file named by `HUB_CONFIG`, else defaults;
    /// then applies environment overrides.
    pub fn load(path: Option<&Path>) -> Result<Config, ConfigError> {
        let path = path.map(Path::to_path_buf).or_else(|| std::env::var_os(ENV_CONFIG).map(PathBuf::from));
        let text = match &path {
            Some(p) => Some(std::fs::read_to_string(p).map_err(|source| ConfigError::Read { path: p.clone(), source })?),
            None => None,
        };
        Config::from_sources(text.as_deref(), |k| std::env::var(k).ok())
    }

    pub fn hub_options(&self) -> hub_core::HubOptions {
        hub_core::HubOptions {
            max_containers_per_user: self.max_containers_per_user,
            default_image: self.default_image.clone(),
            report_app_image: self.report_app_image.clone(),
        }
    }

    pub fn session_ttl(&self) -> Duration {
        Duration::from_secs(self.session_ttl_secs)
    }
}
