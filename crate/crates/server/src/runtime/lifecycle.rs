//! Start/stop orchestration. Operations on one container are serialized by
//! a per-container lock; different containers proceed in parallel.
//!
//! Ordering keeps observers consistent: a route is added before the store
//! says `running`, and removed after the store leaves `running` but before
//! it says `stopped`.

use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use dashmap::DashMap;
use hub_core::containers::{notebook_route, Transition};
use hub_core::mounts::plan_mounts;
use hub_core::{Container, ContainerId, ContainerPurpose, ContainerState, Hub, UserId};
use tokio::net::TcpStream;
use tokio::sync::{Mutex, OwnedMutexGuard};

use super::{DriverError, RuntimeDriver, UsageSample, WorkloadSpec, WorkloadStatus, ROUTE_PREFIX_ENV};
use crate::proxy::RouteTable;

pub const DEFAULT_START_TIMEOUT: Duration = Duration::from_secs(60);

const PROBE_INTERVAL: Duration = Duration::from_millis(20);

#[derive(Debug, thiserror::Error)]
pub enum LifecycleError {
    #[error(transparent)]
    Hub(#[from] hub_core::Error),
    #[error(transparent)]
    Driver(#[from] DriverError),
}

#[derive(Debug, Default)]
struct Slot {
    lock: Arc<Mutex<()>>,
    stop_requested: AtomicBool,
}

enum BringUp {
    Ready { workload: String, upstream: String },
    Aborted { workload: Option<String> },
}

pub struct Lifecycle {
    hub: Arc<Hub>,
    routes: Arc<RouteTable>,
    driver: Arc<dyn RuntimeDriver>,
    start_timeout: Duration,
    slots: DashMap<ContainerId, Arc<Slot>>,
}

impl std::fmt::Debug for Lifecycle {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Lifecycle").field("driver", &self.driver.name()).finish_non_exhaustive()
    }
}

/// Proxy prefix under which a container is served.
pub fn route_prefix(c: &Container) -> String {
    match &c.purpose {
        ContainerPurpose::Notebook => notebook_route(&c.container_id),
        ContainerPurpose::ReportApp { report_id, version } => format!("/report/{report_id}/v{version}"),
    }
}

impl Lifecycle {
    pub fn new(hub: Arc<Hub>, routes: Arc<RouteTable>, driver: Arc<dyn RuntimeDriver>, start_timeout: Duration) -> Self {
        Lifecycle { hub, routes, driver, start_timeout, slots: DashMap::new() }
    }

    pub fn hub(&self) -> &Arc<Hub> {
        &self.hub
    }

    pub fn routes(&self) -> &Arc<RouteTable> {
        &self.routes
    }

    pub fn driver(&self) -> &Arc<dyn RuntimeDriver> {
        &self.driver
    }

    fn slot(&self, id: &ContainerId) -> Arc<Slot> {
        self.slots.entry(id.clone()).or_default().clone()
    }

    /// Starts and waits until the container is running (or failed).
    /// Starting a running container returns it unchanged.
    pub async fn start(&self, id: &ContainerId) -> Result<Container, LifecycleError> {
        let slot = self.slot(id);
        let guard = slot.lock.clone().lock_owned().await;
        self.start_locked(id, &slot, guard).await
    }

    /// Marks the container `starting` and finishes the start in the
    /// background. Returns the container as recorded at that point.
    pub async fn request_start(self: &Arc<Self>, id: &ContainerId) -> Result<Container, LifecycleError> {
        let c = self.hub.container(id)?;
        match c.state {
            ContainerState::Running | ContainerState::Starting => return Ok(c),
            ContainerState::Created | ContainerState::Stopped => {}
            ContainerState::Failed | ContainerState::Stopping => {
                return Err(hub_core::Error::InvalidTransition { from: c.state.to_string(), to: "starting".into() }.into())
            }
        }
        let slot = self.slot(id);
        let this = self.clone();
        let id = id.clone();
        match slot.lock.clone().try_lock_owned() {
            Ok(guard) => {
                slot.stop_requested.store(false, Ordering::SeqCst);
                let c = self.hub.transition_container(&id, Transition::Starting)?;
                tokio::spawn(async move {
                    let slot = this.slot(&id);
                    let _ = this.start_locked(&id, &slot, guard).await;
                });
                Ok(c)
            }
            Err(_) => {
                tokio::spawn(async move {
                    let _ = this.start(&id).await;
                });
                Ok(c)
            }
        }
    }

    async fn start_locked(
        &self,
        id: &ContainerId,
        slot: &Slot,
        _guard: OwnedMutexGuard<()>,
    ) -> Result<Container, LifecycleError> {
        slot.stop_requested.store(false, Ordering::SeqCst);
        let c = self.hub.container(id)?;
        match c.state {
            ContainerState::Running => return Ok(c),
            ContainerState::Starting => {}
            _ => {
                self.hub.transition_container(id, Transition::Starting)?;
            }
        }
        let prefix = route_prefix(&c);
        let mut created = None;
        match self.bring_up(&c, &prefix, slot, &mut created).await {
            Ok(BringUp::Ready { workload, upstream }) => {
                self.routes.add(&prefix, &upstream).expect("generated prefixes are valid");
                let running = Transition::Running { upstream, route_prefix: prefix.clone(), workload_id: workload.clone() };
                match self.hub.transition_container(id, running) {
                    Ok(c) => Ok(c),
                    Err(e) => {
                        self.routes.remove(&prefix);
                        let _ = self.driver.stop(&workload).await;
                        Err(e.into())
                    }
                }
            }
            Ok(BringUp::Aborted { workload }) => {
                if let Some(w) = workload {
                    let _ = self.driver.stop(&w).await;
                }
                self.hub.transition_container(id, Transition::Stopping)?;
                Ok(self.hub.transition_container(id, Transition::Stopped)?)
            }
            Err(e) => {
                if let Some(w) = created {
                    let _ = self.driver.stop(&w).await;
                }
                let _ = self.hub.transition_container(id, Transition::Failed { reason: e.to_string() });
                Err(e)
            }
        }
    }

    async fn bring_up(
        &self,
        c: &Container,
        prefix: &str,
        slot: &Slot,
        created: &mut Option<String>,
    ) -> Result<BringUp, LifecycleError> {
        let layout = self.hub.layout();
        let plan = plan_mounts(&self.hub.state(), layout, &c.container_id)?;
        for e in &plan.entries {
            let path = std::path::Path::new(&e.source);
            if path.starts_with(layout.root()) && !path.exists() {
                std::fs::create_dir_all(path).map_err(hub_core::Error::from)?;
            }
        }
        let spec = WorkloadSpec {
            container_id: c.container_id.clone(),
            image_ref: c.image_ref.clone(),
            plan,
            env: vec![
                (ROUTE_PREFIX_ENV.to_owned(), prefix.to_owned()),
                ("HUB_CONTAINER_ID".to_owned(), c.container_id.to_string()),
            ],
        };
        let workload = self.driver.create(&spec).await?;
        *created = Some(workload.clone());
        if slot.stop_requested.load(Ordering::SeqCst) {
            return Ok(BringUp::Aborted { workload: Some(workload) });
        }
        let upstream = self.driver.start(&workload).await?;
        let deadline = Instant::now() + self.start_timeout;
        loop {
            if slot.stop_requested.load(Ordering::SeqCst) {
                return Ok(BringUp::Aborted { workload: Some(workload) });
            }
            let remaining = deadline.saturating_duration_since(Instant::now());
            if remaining.is_zero() {
                return Err(DriverError::StartTimeout(self.start_timeout).into());
            }
            let attempt = tokio::time::timeout(remaining.min(PROBE_INTERVAL * 10), TcpStream::connect(&upstream)).await;
            if let Ok(Ok(_)) = attempt {
                return Ok(BringUp::Ready { workload, upstream });
            }
            tokio::time::sleep(PROBE_INTERVAL.min(remaining)).await;
        }
    }

    /// Stops the container. Stopping a stopped or never-started container is
    /// a no-op; a start in progress is abandoned.
    pub async fn stop(&self, id: &ContainerId) -> Result<Container, LifecycleError> {
        let slot = self.slot(id);
        slot.stop_requested.store(true, Ordering::SeqCst);
        let _guard = slot.lock.lock().await;
        let c = self.hub.container(id)?;
        match c.state {
            ContainerState::Created | ContainerState::Stopped => return Ok(c),
            ContainerState::Stopping => {}
            ContainerState::Running | ContainerState::Starting | ContainerState::Failed => {
                self.hub.transition_container(id, Transition::Stopping)?;
            }
        }
        self.routes.remove(&route_prefix(&c));
        if let Some(w) = &c.workload_id {
            if let Err(e) = self.driver.stop(w).await {
                let _ = self.hub.transition_container(id, Transition::Failed { reason: e.to_string() });
                return Err(e.into());
            }
        }
        Ok(self.hub.transition_container(id, Transition::Stopped)?)
    }

    /// Current record, reconciled against the driver: a running container
    /// whose workload has vanished is marked failed and loses its route.
    pub async fn inspect(&self, id: &ContainerId) -> Result<Container, LifecycleError> {
        let c = self.hub.container(id)?;
        let (ContainerState::Running, Some(w)) = (c.state, &c.workload_id) else { return Ok(c) };
        match self.driver.inspect(w).await {
            Ok(WorkloadStatus::Running) | Err(_) => return Ok(c),
            Ok(_) => {}
        }
        let slot = self.slot(id);
        let _guard = slot.lock.lock().await;
        let current = self.hub.container(id)?;
        if current.state != ContainerState::Running || current.workload_id != c.workload_id {
            return Ok(current);
        }
        let failed = self.hub.transition_container(id, Transition::Failed { reason: "workload vanished".into() })?;
        self.routes.remove(&route_prefix(&c));
        Ok(failed)
    }

    /// Brings records left over from a previous process in line with the
    /// driver: live workloads get their routes back, the rest are failed.
    pub async fn reconcile_all(&self) {
        let containers: Vec<Container> = self.hub.state().containers.values().cloned().collect();
        for c in containers {
            let id = &c.container_id;
            match (c.state, &c.workload_id, &c.upstream_address) {
                (ContainerState::Running, Some(w), Some(upstream)) => {
                    if matches!(self.driver.inspect(w).await, Ok(WorkloadStatus::Running)) {
                        self.routes.add(&route_prefix(&c), upstream).expect("generated prefixes are valid");
                    } else {
                        let _ = self.hub.transition_container(id, Transition::Failed { reason: "workload vanished".into() });
                    }
                }
                (ContainerState::Starting, ..) => {
                    let _ = self.hub.transition_container(id, Transition::Failed { reason: "start interrupted".into() });
                }
                (ContainerState::Stopping, w, _) => {
                    if let Some(w) = w {
                        let _ = self.driver.stop(w).await;
                    }
                    let _ = self.hub.transition_container(id, Transition::Stopped);
                }
                _ => {}
            }
        }
    }

    /// One sample per running container, optionally restricted to one owner.
    pub async fn usage(&self, owner: Option<&UserId>) -> Vec<UsageSample> {
        let running: Vec<Container> = self
            .hub
            .state()
            .containers
            .values()
            .filter(|c| c.state == ContainerState::Running && owner.is_none_or(|o| &c.owner_id == o))
            .cloned()
            .collect();
        let mut out = Vec::new();
        for c in running {
            if let Some(w) = &c.workload_id {
                if let Ok(s) = self.driver.stats(w, &c.container_id).await {
                    out.push(s);
                }
            }
        }
        out
    }
}
