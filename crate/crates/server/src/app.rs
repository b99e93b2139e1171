//! Wiring: one process hosts the API and the proxy on separate listeners.

use std::future::Future;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use hub_core::Hub;
use tokio::net::TcpListener;

use crate::auth::{IdentityProvider, Sessions, SignedProvider, StaticProvider};
use crate::config::{Config, DriverKind, IdentityKind};
use crate::proxy::{self, ProxyState, RouteSigner, RouteTable};
use crate::runtime::{EngineDriver, Lifecycle, RuntimeDriver, SimDriver};

#[derive(Debug, thiserror::Error)]
pub enum ServeError {
    #[error(transparent)]
    Hub(#[from] hub_core::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Config(String),
}

#[derive(Debug, Clone)]
pub struct AppSettings {
    pub auto_provision: bool,
    pub session_ttl: Duration,
    pub start_timeout: Duration,
    /// Route cookies are required at the proxy when set.
    pub require_route_cookie: bool,
    pub cookie_secret: Option<Vec<u8>>,
    pub ui_dir: Option<PathBuf>,
}

impl Default for AppSettings {
    fn default() -> Self {
        AppSettings {
            auto_provision: false,
            session_ttl: crate::auth::DEFAULT_SESSION_TTL,
            start_timeout: crate::runtime::DEFAULT_START_TIMEOUT,
            require_route_cookie: true,
            cookie_secret: None,
            ui_dir: None,
        }
    }
}

pub struct App {
    pub hub: Arc<Hub>,
    pub routes: Arc<RouteTable>,
    pub lifecycle: Arc<Lifecycle>,
    pub sessions: Sessions,
    pub identity: Arc<dyn IdentityProvider>,
    pub signer: RouteSigner,
    pub settings: AppSettings,
}

impl std::fmt::Debug for App {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("App").field("lifecycle", &self.lifecycle).finish_non_exhaustive()
    }
}

impl App {
    pub fn new(
        hub: Arc<Hub>,
        driver: Arc<dyn RuntimeDriver>,
        identity: Arc<dyn IdentityProvider>,
        settings: AppSettings,
    ) -> Arc<App> {
        let routes = Arc::new(RouteTable::new());
        let lifecycle = Arc::new(Lifecycle::new(hub.clone(), routes.clone(), driver, settings.start_timeout));
        let signer = match &settings.cookie_secret {
            Some(k) => RouteSigner::new(k.clone()),
            None => RouteSigner::random(),
        };
        Arc::new(App { hub, routes, lifecycle, sessions: Sessions::new(settings.session_ttl), identity, signer, settings })
    }

    /// Builds the app described by `config`: opens the store, applies
    /// configured groups and reconciles containers with the driver.
    pub async fn from_config(config: &Config) -> Result<Arc<App>, ServeError> {
        let hub = Arc::new(Hub::open(&config.storage_root, config.hub_options())?);
        for (group, members) in &config.groups {
            let ids = members.iter().map(|m| hub.user_by_name(m).map(|u| u.user_id)).collect::<Result<Vec<_>, _>>()?;
            hub.set_group(group, &ids)?;
        }
        let driver: Arc<dyn RuntimeDriver> = match config.driver {
            DriverKind::Sim => Arc::new(SimDriver::new(config.runtime.sim())),
            DriverKind::Engine => Arc::new(EngineDriver::new(config.runtime.engine())),
        };
        let identity: Arc<dyn IdentityProvider> = match config.identity.kind {
            IdentityKind::Static => Arc::new(StaticProvider::new(config.identity.tokens.clone())),
            IdentityKind::Signed => {
                let secret = config
                    .identity
                    .secret
                    .clone()
                    .ok_or_else(|| ServeError::Config("identity.secret is required for the signed provider".into()))?;
                Arc::new(SignedProvider::new(secret.into_bytes()))
            }
        };
        let settings = AppSettings {
            auto_provision: config.identity.auto_provision,
            session_ttl: config.session_ttl(),
            start_timeout: config.runtime.start_timeout(),
            require_route_cookie: config.require_route_cookie,
            cookie_secret: config.route_cookie_secret.clone().map(String::into_bytes),
            ui_dir: config.ui_dir.clone(),
        };
        let app = App::new(hub, driver, identity, settings);
        app.lifecycle.reconcile_all().await;
        Ok(app)
    }

    pub fn proxy_state(&self) -> ProxyState {
        ProxyState {
            routes: self.routes.clone(),
            signer: self.settings.require_route_cookie.then(|| self.signer.clone()),
        }
    }
}

/// Bound listeners for the two ports.
pub struct Listeners {
    pub api: TcpListener,
    pub proxy: TcpListener,
}

impl Listeners {
    pub async fn bind(host: &str, api_port: u16, proxy_port: u16) -> std::io::Result<Listeners> {
        Ok(Listeners {
            api: TcpListener::bind((host, api_port)).await?,
            proxy: TcpListener::bind((host, proxy_port)).await?,
        })
    }

    pub fn addrs(&self) -> std::io::Result<(SocketAddr, SocketAddr)> {
        Ok((self.api.local_addr()?, self.proxy.local_addr()?))
    }
}

/// Runs API and proxy until `shutdown` resolves.
pub async fn serve(app: Arc<App>, listeners: Listeners, shutdown: impl Future<Output = ()> + Send + 'static) -> std::io::Result<()> {
    let (tx, rx) = tokio::sync::watch::channel(false);
    let proxy_rx = rx.clone();
    let proxy = tokio::spawn(proxy::serve(listeners.proxy, app.proxy_state(), async move {
        let mut rx = proxy_rx;
        let _ = rx.wait_for(|stop| *stop).await;
    }));
    tokio::spawn(async move {
        shutdown.await;
        let _ = tx.send(true);
    });
    let router = crate::api::router(app);
    let mut rx = rx;
    axum::serve(listeners.api, router.into_make_service_with_connect_info::<SocketAddr>())
        .with_graceful_shutdown(async move {
            let _ = rx.wait_for(|stop| *stop).await;
        })
        .await?;
    let _ = proxy.await;
    Ok(())
}
