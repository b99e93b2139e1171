//! Driver for a Docker-compatible engine, spoken over its local unix socket.

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::Mutex;

use async_trait::async_trait;
use bytes::Bytes;
use chrono::Utc;
use http_body_util::{BodyExt, Full};
use hub_core::{ContainerId, Timestamp};
use hyper::{Method, Request, StatusCode};
use hyper_util::rt::TokioIo;
use serde_json::{json, Value};
use tokio::net::UnixStream;

use super::{DriverError, RuntimeDriver, UsageSample, WorkloadSpec, WorkloadStatus};

pub const DEFAULT_API_VERSION: &str = "v1.43";

/// Port the notebook image listens on inside the container.
const NOTEBOOK_PORT: &str = "8888/tcp";

#[derive(Debug, Clone)]
pub struct EngineConfig {
    pub socket: PathBuf,
    pub api_version: String,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig { socket: "/var/run/docker.sock".into(), api_version: DEFAULT_API_VERSION.into() }
    }
}

#[derive(Debug)]
pub struct EngineDriver {
    config: EngineConfig,
    last_sample: Mutex<HashMap<ContainerId, Timestamp>>,
}

impl EngineDriver {
    pub fn new(config: EngineConfig) -> Self {
        EngineDriver { config, last_sample: Mutex::new(HashMap::new()) }
    }

    async fn call(&self, method: Method, path: &str, body: Option<Value>) -> Result<(StatusCode, Value), DriverError> {
        let unavailable = |e: &dyn std::fmt::Display| DriverError::Unavailable(format!("{}: {e}", self.config.socket.display()));
        let stream = UnixStream::connect(&self.config.socket).await.map_err(|e| unavailable(&e))?;
        let (mut sender, conn) = hyper::client::conn::http1::handshake(TokioIo::new(stream)).await.map_err(|e| unavailable(&e))?;
        tokio::spawn(async move {
            let _ = conn.await;
        });
        let uri = format!("/{}{path}", self.config.api_version);
        let mut req = Request::builder().method(method).uri(uri).header("host", "engine");
        let payload = match body {
            Some(v) => {
                req = req.header("content-type", "application/json");
                Bytes::from(v.to_string())
            }
            None => Bytes::new(),
        };
        let req = req.body(Full::new(payload)).map_err(|e| DriverError::Failed(e.to_string()))?;
        let resp = sender.send_request(req).await.map_err(|e| unavailable(&e))?;
        let status = resp.status();
        let bytes = resp.into_body().collect().await.map_err(|e| unavailable(&e))?.to_bytes();
        let value = if bytes.is_empty() { Value::Null } else { serde_json::from_slice(&bytes).unwrap_or(Value::Null) };
        Ok((status, value))
    }

    fn message(v: &Value) -> String {
        v.get("message").and_then(Value::as_str).unwrap_or("engine error").to_owned()
    }

    /// Request body for `POST /containers/create`.
    pub fn create_body(spec: &WorkloadSpec) -> Value {
        let binds: Vec<String> =
            spec.plan.entries.iter().map(|e| format!("{}:{}:{}", e.source, e.target, e.mode.as_str())).collect();
        let env: Vec<String> = spec.env.iter().map(|(k, v)| format!("{k}={v}")).collect();
        let id = spec.plan.numeric_id;
        json!({
            "Image": spec.image_ref,
            "User": format!("{id}:{id}"),
            "Env": env,
            "Labels": { "hub.container_id": spec.container_id.as_str() },
            "ExposedPorts": { NOTEBOOK_PORT: {} },
            "HostConfig": {
                "Binds": binds,
                "PortBindings": { NOTEBOOK_PORT: [{ "HostIp": "127.0.0.1", "HostPort": "" }] },
            },
        })
    }
}

#[async_trait]
impl RuntimeDriver for EngineDriver {
    fn name(&self) -> &'static str {
        "engine"
    }

    async fn create(&self, spec: &WorkloadSpec) -> Result<String, DriverError> {
        let path = format!("/containers/create?name=hub-{}", spec.container_id);
        let (status, v) = self.call(Method::POST, &path, Some(Self::create_body(spec))).await?;
        match status {
            StatusCode::CREATED | StatusCode::OK => v
                .get("Id")
                .and_then(Value::as_str)
                .map(str::to_owned)
                .ok_or_else(|| DriverError::Failed("create response without Id".into())),
            StatusCode::NOT_FOUND => Err(DriverError::ImageNotFound(spec.image_ref.clone())),
            _ => Err(DriverError::Failed(Self::message(&v))),
        }
    }

    async fn start(&self, workload: &str) -> Result<String, DriverError> {
        let (status, v) = self.call(Method::POST, &format!("/containers/{workload}/start"), None).await?;
        if !matches!(status, StatusCode::NO_CONTENT | StatusCode::NOT_MODIFIED) {
            return Err(DriverError::Failed(Self::message(&v)));
        }
        let (status, v) = self.call(Method::GET, &format!("/containers/{workload}/json"), None).await?;
        if status != StatusCode::OK {
            return Err(DriverError::Failed(Self::message(&v)));
        }
        let binding = &v["NetworkSettings"]["Ports"][NOTEBOOK_PORT][0];
        let port = binding["HostPort"].as_str().ok_or_else(|| DriverError::Failed("no published port".into()))?;
        let ip = match binding["HostIp"].as_str() {
            Some("") | Some("0.0.0.0") | None => "127.0.0.1",
            Some(ip) => ip,
        };
        Ok(format!("{ip}:{port}"))
    }

    async fn stop(&self, workload: &str) -> Result<(), DriverError> {
        let (status, v) = self.call(Method::POST, &format!("/containers/{workload}/stop?t=10"), None).await?;
        if !matches!(status, StatusCode::NO_CONTENT | StatusCode::NOT_MODIFIED | StatusCode::NOT_FOUND) {
            return Err(DriverError::Failed(Self::message(&v)));
        }
        let (status, v) = self.call(Method::DELETE, &format!("/containers/{workload}?force=true"), None).await?;
        if !matches!(status, StatusCode::NO_CONTENT | StatusCode::NOT_FOUND) {
            return Err(DriverError::Failed(Self::message(&v)));
        }
        Ok(())
    }

    async fn inspect(&self, workload: &str) -> Result<WorkloadStatus, DriverError> {
        let (status, v) = self.call(Method::GET, &format!("/containers/{workload}/json"), None).await?;
        match status {
            StatusCode::NOT_FOUND => Ok(WorkloadStatus::Missing),
            StatusCode::OK if v["State"]["Running"].as_bool() == Some(true) => Ok(WorkloadStatus::Running),
            StatusCode::OK => Ok(WorkloadStatus::Exited),
            _ => Err(DriverError::Failed(Self::message(&v))),
        }
    }

    async fn stats(&self, workload: &str, container: &ContainerId) -> Result<UsageSample, DriverError> {
        let (status, v) = self.call(Method::GET, &format!("/containers/{workload}/stats?stream=false"), None).await?;
        if status != StatusCode::OK {
            return Err(DriverError::Failed(Self::message(&v)));
        }
        let num = |p: &str| v.pointer(p).and_then(Value::as_f64).unwrap_or(0.0);
        let cpu_delta = num("/cpu_stats/cpu_usage/total_usage") - num("/precpu_stats/cpu_usage/total_usage");
        let system_delta = num("/cpu_stats/system_cpu_usage") - num("/precpu_stats/system_cpu_usage");
        let cpu_fraction = if system_delta > 0.0 { (cpu_delta / system_delta).clamp(0.0, 1.0) } else { 0.0 };
        let memory_bytes = v.pointer("/memory_stats/usage").and_then(Value::as_u64).unwrap_or(0);
        let mut last = self.last_sample.lock().expect("engine samples poisoned");
        let now = Utc::now();
        let sampled_at = match last.get(container) {
            Some(prev) if *prev >= now => *prev + chrono::Duration::microseconds(1),
            _ => now,
        };
        last.insert(container.clone(), sampled_at);
        Ok(UsageSample { container_id: container.clone(), cpu_fraction, memory_bytes, sampled_at })
    }
}
