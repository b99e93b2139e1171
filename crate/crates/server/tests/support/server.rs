//! In-process hub on ephemeral ports, driven over real HTTP.

use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::Duration;

use base64::Engine as _;
use hub_core::{Hub, HubOptions};
use hub_server::auth::StaticProvider;
use hub_server::runtime::{SimConfig, SimDriver};
use hub_server::{App, AppSettings, Listeners};
use reqwest::{Method, StatusCode};
use serde_json::{json, Value};

pub struct TestServer {
    pub app: Arc<App>,
    pub sim: Arc<SimDriver>,
    pub api: String,
    pub proxy: String,
    pub client: reqwest::Client,
    shutdown: Option<tokio::sync::oneshot::Sender<()>>,
    _dir: Option<tempfile::TempDir>,
}

/// Every user `name` authenticates with assertion `name:pw-name`.
pub fn assertion(name: &str) -> String {
    format!("{name}:pw-{name}")
}

pub struct Options {
    pub users: Vec<String>,
    pub require_route_cookie: bool,
    pub start_timeout: Duration,
    pub max_containers_per_user: usize,
    pub seed: u64,
    pub ui_dir: Option<std::path::PathBuf>,
    /// Snapshot every mutation to disk instead of keeping state in memory.
    pub persistent: bool,
}

impl Default for Options {
    fn default() -> Self {
        Options {
            users: ["alice", "bob", "carol"].iter().map(|s| s.to_string()).collect(),
            require_route_cookie: true,
            start_timeout: Duration::from_secs(5),
            max_containers_per_user: 4,
            seed: 7,
            ui_dir: None,
            persistent: false,
        }
    }
}

impl TestServer {
    pub async fn start() -> TestServer {
        Self::with(Options::default()).await
    }

    pub async fn with(opts: Options) -> TestServer {
        let dir = tempfile::tempdir().unwrap();
        let options = HubOptions { max_containers_per_user: opts.max_containers_per_user, ..Default::default() };
        let hub = Arc::new(if opts.persistent {
            Hub::open(dir.path(), options).unwrap()
        } else {
            Hub::ephemeral(dir.path(), options)
        });
        let tokens: BTreeMap<String, String> = opts.users.iter().map(|u| (u.clone(), format!("pw-{u}"))).collect();
        // port 0 region: let the kernel pick, but keep the sim's range valid
        let sim = Arc::new(SimDriver::new(SimConfig { port_start: 40000, port_end: 59999, seed: opts.seed }));
        let app = App::new(
            hub,
            sim.clone(),
            Arc::new(StaticProvider::new(tokens)),
            AppSettings {
                auto_provision: true,
                start_timeout: opts.start_timeout,
                require_route_cookie: opts.require_route_cookie,
                ui_dir: opts.ui_dir,
                ..Default::default()
            },
        );
        let listeners = Listeners::bind("127.0.0.1", 0, 0).await.unwrap();
        let (api, proxy) = listeners.addrs().unwrap();
        let (tx, rx) = tokio::sync::oneshot::channel();
        tokio::spawn(hub_server::app::serve(app.clone(), listeners, async move {
            let _ = rx.await;
        }));
        TestServer {
            app,
            sim,
            api: format!("http://{api}"),
            proxy: format!("http://{proxy}"),
            client: reqwest::Client::builder().redirect(reqwest::redirect::Policy::none()).build().unwrap(),
            shutdown: Some(tx),
            _dir: Some(dir),
        }
    }

    pub async fn call(&self, method: Method, path: &str, token: Option<&str>, body: Option<Value>) -> (StatusCode, Value) {
        let (status, _, v) = self.call_full(method, path, token, body).await;
        (status, v)
    }

    pub async fn call_full(
        &self,
        method: Method,
        path: &str,
        token: Option<&str>,
        body: Option<Value>,
    ) -> (StatusCode, reqwest::header::HeaderMap, Value) {
        let mut req = self.client.request(method, format!("{}{path}", self.api));
        if let Some(t) = token {
            req = req.bearer_auth(t);
        }
        if let Some(b) = body {
            req = req.json(&b);
        }
        let resp = req.send().await.unwrap();
        let status = resp.status();
        let headers = resp.headers().clone();
        let bytes = resp.bytes().await.unwrap();
        let value = serde_json::from_slice(&bytes).unwrap_or(Value::Null);
        (status, headers, value)
    }

    pub async fn get(&self, path: &str, token: Option<&str>) -> (StatusCode, Value) {
        self.call(Method::GET, path, token, None).await
    }

    pub async fn post(&self, path: &str, token: Option<&str>, body: Value) -> (StatusCode, Value) {
        self.call(Method::POST, path, token, Some(body)).await
    }

    pub async fn login(&self, user: &str) -> String {
        let (status, v) = self.post("/auth/login", None, json!({ "assertion": assertion(user) })).await;
        assert_eq!(status, StatusCode::OK, "login {user}: {v}");
        v["token"].as_str().unwrap().to_owned()
    }

    pub async fn create_project(&self, token: &str, name: &str, scope: &str) -> String {
        let (status, v) = self.post("/projects", Some(token), json!({ "name": name, "scope": scope })).await;
        assert_eq!(status, StatusCode::CREATED, "{v}");
        v["project_id"].as_str().unwrap().to_owned()
    }

    pub async fn publish(&self, token: &str, project: &str, name: &str, scope: &str, files: &[(&str, &[u8])]) -> Value {
        let files: BTreeMap<&str, String> =
            files.iter().map(|(p, b)| (*p, base64::engine::general_purpose::STANDARD.encode(b))).collect();
        let (status, v) = self
            .post(
                "/reports",
                Some(token),
                json!({ "project_id": project, "name": name, "scope": scope, "source": { "files": files } }),
            )
            .await;
        assert_eq!(status, StatusCode::CREATED, "{v}");
        v
    }

    /// Polls `GET /containers/{id}` until the state is no longer `starting`.
    pub async fn wait_settled(&self, token: &str, id: &str) -> Value {
        for _ in 0..500 {
            let (_, v) = self.get(&format!("/containers/{id}"), Some(token)).await;
            if v["state"] != "starting" {
                return v;
            }
            tokio::time::sleep(Duration::from_millis(10)).await;
        }
        panic!("container {id} stuck in starting");
    }

    /// Raw bytes from the API port.
    pub async fn fetch(&self, path: &str, token: Option<&str>) -> (StatusCode, Vec<u8>) {
        let mut req = self.client.get(format!("{}{path}", self.api));
        if let Some(t) = token {
            req = req.bearer_auth(t);
        }
        let resp = req.send().await.unwrap();
        (resp.status(), resp.bytes().await.unwrap().to_vec())
    }
}

impl Drop for TestServer {
    fn drop(&mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
    }
}
