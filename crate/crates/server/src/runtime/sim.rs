//! In-process driver. Each workload is a small HTTP server on a loopback
//! port: it echoes requests, relays WebSocket frames, and serves report
//! files when the plan mounts a report tree.

use std::collections::{HashMap, VecDeque};
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Mutex;
use std::time::Duration;

use async_trait::async_trait;
use axum::body::Body;
use axum::extract::ws::{Message, WebSocketUpgrade};
use axum::extract::{FromRequestParts, Request, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use chrono::Utc;
use hub_core::mounts::REPORT_APP_TARGET;
use hub_core::{ContainerId, Timestamp};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tokio::net::TcpListener;
use tokio::task::JoinHandle;

use super::{DriverError, RuntimeDriver, UsageSample, WorkloadSpec, WorkloadStatus, ROUTE_PREFIX_ENV};

#[derive(Debug, Clone)]
pub struct SimConfig {
    pub port_start: u16,
    pub port_end: u16,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig { port_start: 40000, port_end: 40999, seed: 0 }
    }
}

/// One-shot faults consumed by the next `create` or `start` call.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Fault {
    ImageNotFound,
    Unavailable,
    /// `start` sleeps this long before answering.
    DelayStart(Duration),
    /// `start` returns an address that never accepts connections.
    NeverReady,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpawnRecord {
    pub workload_id: String,
    pub container_id: ContainerId,
    pub image_ref: String,
    pub numeric_id: u32,
    pub mounts: Vec<(String, String, String)>,
}

#[derive(Debug)]
struct Workload {
    spec: WorkloadSpec,
    addr: Option<SocketAddr>,
    server: Option<JoinHandle<()>>,
}

#[derive(Default, Debug)]
struct Inner {
    next_id: u64,
    next_port: u16,
    workloads: HashMap<String, Workload>,
    spawns: Vec<SpawnRecord>,
    faults: VecDeque<Fault>,
    missing_images: Vec<String>,
    last_sample: HashMap<ContainerId, Timestamp>,
}

#[derive(Debug)]
pub struct SimDriver {
    config: SimConfig,
    inner: Mutex<Inner>,
    rng: Mutex<ChaCha8Rng>,
}

impl SimDriver {
    pub fn new(config: SimConfig) -> Self {
        let rng = ChaCha8Rng::seed_from_u64(config.seed);
        let inner = Inner { next_port: config.port_start, ..Default::default() };
        SimDriver { config, inner: Mutex::new(inner), rng: Mutex::new(rng) }
    }

    fn lock(&self) -> std::sync::MutexGuard<'_, Inner> {
        self.inner.lock().expect("sim driver poisoned")
    }

    pub fn inject(&self, fault: Fault) {
        self.lock().faults.push_back(fault);
    }

    pub fn reject_image(&self, image: &str) {
        self.lock().missing_images.push(image.to_owned());
    }

    /// Simulates the workload dying underneath the hub.
    pub fn kill(&self, workload: &str) -> bool {
        let mut inner = self.lock();
        match inner.workloads.remove(workload) {
            Some(w) => {
                if let Some(h) = w.server {
                    h.abort();
                }
                true
            }
            None => false,
        }
    }

    pub fn spawns(&self) -> Vec<SpawnRecord> {
        self.lock().spawns.clone()
    }

    /// Workloads currently serving, by id.
    pub fn live_workloads(&self) -> Vec<String> {
        let mut ids: Vec<String> =
            self.lock().workloads.iter().filter(|(_, w)| w.server.is_some()).map(|(id, _)| id.clone()).collect();
        ids.sort();
        ids
    }

    fn take_fault(&self, wanted: impl Fn(&Fault) -> bool) -> Option<Fault> {
        let mut inner = self.lock();
        let pos = inner.faults.iter().position(wanted)?;
        inner.faults.remove(pos)
    }

    fn bind_next_port(&self) -> Result<std::net::TcpListener, DriverError> {
        let mut inner = self.lock();
        let span = u32::from(self.config.port_end - self.config.port_start) + 1;
        for _ in 0..span {
            let port = inner.next_port;
            inner.next_port = if port >= self.config.port_end { self.config.port_start } else { port + 1 };
            if let Ok(l) = std::net::TcpListener::bind(("127.0.0.1", port)) {
                return Ok(l);
            }
        }
        Err(DriverError::Unavailable(format!(
            "no free port in {}..={}",
            self.config.port_start, self.config.port_end
        )))
    }
}

#[derive(Clone)]
struct AppState {
    container_id: ContainerId,
    prefix: String,
    report_root: Option<PathBuf>,
}

async fn handle(State(app): State<AppState>, req: Request) -> Response {
    let (mut parts, _body) = req.into_parts();
    if parts.headers.contains_key(header::UPGRADE) {
        return match WebSocketUpgrade::from_request_parts(&mut parts, &()).await {
            Ok(ws) => ws.on_upgrade(|mut socket| async move {
                while let Some(Ok(msg)) = socket.recv().await {
                    let reply = match msg {
                        Message::Text(t) => Message::Text(t),
                        Message::Binary(b) => Message::Binary(b),
                        Message::Close(_) => break,
                        _ => continue,
                    };
                    if socket.send(reply).await.is_err() {
                        break;
                    }
                }
            }),
            Err(e) => e.into_response(),
        };
    }
    let path = parts.uri.path().to_owned();
    if let Some(root) = &app.report_root {
        let rel = path.strip_prefix(&app.prefix).unwrap_or(&path).trim_start_matches('/');
        let rel = if rel.is_empty() || rel.ends_with('/') { format!("{rel}index.html") } else { rel.to_owned() };
        if rel.split('/').any(|s| s == ".." || s.is_empty()) {
            return StatusCode::BAD_REQUEST.into_response();
        }
        return match tokio::fs::read(root.join(&rel)).await {
            Ok(bytes) => {
                let mime = mime_guess::from_path(&rel).first_or_octet_stream();
                ([(header::CONTENT_TYPE, mime.to_string())], Body::from(bytes)).into_response()
            }
            Err(_) => StatusCode::NOT_FOUND.into_response(),
        };
    }
    let forwarded_for = parts.headers.get("x-forwarded-for").and_then(|v| v.to_str().ok()).map(str::to_owned);
    axum::Json(serde_json::json!({
        "container_id": app.container_id,
        "method": parts.method.as_str(),
        "path": path,
        "query": parts.uri.query(),
        "x_forwarded_for": forwarded_for,
    }))
    .into_response()
}

#[async_trait]
impl RuntimeDriver for SimDriver {
    fn name(&self) -> &'static str {
        "sim"
    }

    async fn create(&self, spec: &WorkloadSpec) -> Result<String, DriverError> {
        match self.take_fault(|f| matches!(f, Fault::ImageNotFound | Fault::Unavailable)) {
            Some(Fault::ImageNotFound) => return Err(DriverError::ImageNotFound(spec.image_ref.clone())),
            Some(Fault::Unavailable) => return Err(DriverError::Unavailable("injected".into())),
            _ => {}
        }
        let mut inner = self.lock();
        if inner.missing_images.contains(&spec.image_ref) {
            return Err(DriverError::ImageNotFound(spec.image_ref.clone()));
        }
        inner.next_id += 1;
        let id = format!("sim-{}", inner.next_id);
        inner.spawns.push(SpawnRecord {
            workload_id: id.clone(),
            container_id: spec.container_id.clone(),
            image_ref: spec.image_ref.clone(),
            numeric_id: spec.plan.numeric_id,
            mounts: spec
                .plan
                .entries
                .iter()
                .map(|e| (e.source.clone(), e.target.clone(), e.mode.as_str().to_owned()))
                .collect(),
        });
        inner.workloads.insert(id.clone(), Workload { spec: spec.clone(), addr: None, server: None });
        Ok(id)
    }

    async fn start(&self, workload: &str) -> Result<String, DriverError> {
        if let Some(Fault::DelayStart(d)) = self.take_fault(|f| matches!(f, Fault::DelayStart(_))) {
            tokio::time::sleep(d).await;
        }
        let never_ready = self.take_fault(|f| *f == Fault::NeverReady).is_some();
        let spec = {
            let inner = self.lock();
            let w = inner.workloads.get(workload).ok_or_else(|| DriverError::Failed(format!("{workload} is gone")))?;
            if let Some(addr) = w.addr {
                return Ok(addr.to_string());
            }
            w.spec.clone()
        };
        let listener = self.bind_next_port()?;
        let addr = listener.local_addr().map_err(|e| DriverError::Unavailable(e.to_string()))?;

        let mut inner = self.lock();
        let Some(w) = inner.workloads.get_mut(workload) else {
            return Err(DriverError::Failed(format!("{workload} is gone")));
        };
        w.addr = Some(addr);
        if never_ready {
            // dropping the listener leaves an address that refuses connections
            return Ok(addr.to_string());
        }
        listener.set_nonblocking(true).map_err(|e| DriverError::Unavailable(e.to_string()))?;
        let listener = TcpListener::from_std(listener).map_err(|e| DriverError::Unavailable(e.to_string()))?;
        let app = AppState {
            container_id: spec.container_id.clone(),
            prefix: spec.env.iter().find(|(k, _)| k == ROUTE_PREFIX_ENV).map(|(_, v)| v.clone()).unwrap_or_default(),
            report_root: spec
                .plan
                .entries
                .iter()
                .find(|e| e.target == REPORT_APP_TARGET)
                .map(|e| PathBuf::from(&e.source)),
        };
        let router = axum::Router::new().fallback(handle).with_state(app);
        w.server = Some(tokio::spawn(async move {
            let _ = axum::serve(listener, router).await;
        }));
        Ok(addr.to_string())
    }

    async fn stop(&self, workload: &str) -> Result<(), DriverError> {
        self.kill(workload);
        Ok(())
    }

    async fn inspect(&self, workload: &str) -> Result<WorkloadStatus, DriverError> {
        let inner = self.lock();
        Ok(match inner.workloads.get(workload) {
            None => WorkloadStatus::Missing,
            Some(w) if w.server.as_ref().is_some_and(|h| !h.is_finished()) => WorkloadStatus::Running,
            Some(_) => WorkloadStatus::Exited,
        })
    }

    /// Synthetic, seeded usage: identical seeds give identical sequences.
    async fn stats(&self, workload: &str, container: &ContainerId) -> Result<UsageSample, DriverError> {
        if !self.lock().workloads.contains_key(workload) {
            return Err(DriverError::Failed(format!("{workload} is gone")));
        }
        let (cpu_fraction, memory_bytes) = {
            let mut rng = self.rng.lock().expect("sim rng poisoned");
            (rng.random::<f64>(), rng.random_range(64u64 << 20..2u64 << 30))
        };
        let mut inner = self.lock();
        let now = Utc::now();
        let sampled_at = match inner.last_sample.get(container) {
            Some(prev) if *prev >= now => *prev + chrono::Duration::microseconds(1),
            _ => now,
        };
        inner.last_sample.insert(container.clone(), sampled_at);
        Ok(UsageSample { container_id: container.clone(), cpu_fraction, memory_bytes, sampled_at })
    }
}
