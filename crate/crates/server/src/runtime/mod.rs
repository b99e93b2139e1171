//! Container workloads behind a driver interface, and the lifecycle manager
//! that keeps store state, proxy routes and driver truth in step.

mod engine;
mod lifecycle;
mod sim;

use std::time::Duration;

use async_trait::async_trait;
use hub_core::mounts::MountPlan;
use hub_core::{ContainerId, Timestamp};
use serde::Serialize;

pub use engine::{EngineConfig, EngineDriver, DEFAULT_API_VERSION};
pub use lifecycle::{route_prefix, Lifecycle, LifecycleError, DEFAULT_START_TIMEOUT};
pub use sim::{Fault, SimConfig, SimDriver, SpawnRecord};

/// Environment variable carrying the proxy prefix a workload is served under.
pub const ROUTE_PREFIX_ENV: &str = "HUB_ROUTE_PREFIX";

#[derive(Debug, Clone)]
pub struct WorkloadSpec {
    pub container_id: ContainerId,
    pub image_ref: String,
    pub plan: MountPlan,
    pub env: Vec<(String, String)>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum WorkloadStatus {
    Running,
    Exited,
    Missing,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UsageSample {
    pub container_id: ContainerId,
    pub cpu_fraction: f64,
    pub memory_bytes: u64,
    pub sampled_at: Timestamp,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DriverError {
    #[error("image not found: {0}")]
    ImageNotFound(String),
    #[error("driver unavailable: {0}")]
    Unavailable(String),
    #[error("start timed out after {0:?}")]
    StartTimeout(Duration),
    #[error("workload failed: {0}")]
    Failed(String),
}

impl DriverError {
    pub fn code(&self) -> &'static str {
        match self {
            DriverError::ImageNotFound(_) => "image_not_found",
            DriverError::Unavailable(_) => "driver_unavailable",
            DriverError::StartTimeout(_) => "start_timeout",
            DriverError::Failed(_) => "workload_failed",
        }
    }
}

/// Both drivers honour the same contract: `create` materializes a workload
/// with the plan's bindings and numeric id, `start` returns the upstream
/// address, `stop` stops and removes it (missing workloads are fine).
#[async_trait]
pub trait RuntimeDriver: Send + Sync + 'static {
    fn name(&self) -> &'static str;
    async fn create(&self, spec: &WorkloadSpec) -> Result<String, DriverError>;
    async fn start(&self, workload: &str) -> Result<String, DriverError>;
    async fn stop(&self, workload: &str) -> Result<(), DriverError>;
    async fn inspect(&self, workload: &str) -> Result<WorkloadStatus, DriverError>;
    async fn stats(&self, workload: &str, container: &ContainerId) -> Result<UsageSample, DriverError>;
}
