//! HTTP/1.1 forwarding with WebSocket pass-through.

use std::convert::Infallible;
use std::future::Future;
use std::net::SocketAddr;
use std::sync::Arc;

use bytes::Bytes;
use http_body_util::{combinators::BoxBody, BodyExt, Full};
use hyper::body::Incoming;
use hyper::header::{HeaderValue, CONNECTION, UPGRADE};
use hyper::{Request, Response, StatusCode};
use hyper_util::rt::TokioIo;
use tokio::net::{TcpListener, TcpStream};

use super::cookie::{cookie_values, RouteSigner};
use super::routes::RouteTable;

type Body = BoxBody<Bytes, hyper::Error>;

#[derive(Debug, Clone)]
pub struct ProxyState {
    pub routes: Arc<RouteTable>,
    /// When set, requests must carry a valid route cookie for the matched prefix.
    pub signer: Option<RouteSigner>,
}

fn json_error(status: StatusCode, code: &str, message: &str) -> Response<Body> {
    let body = serde_json::json!({ "error": code, "message": message }).to_string();
    Response::builder()
        .status(status)
        .header("content-type", "application/json")
        .body(Full::new(Bytes::from(body)).map_err(|never| match never {}).boxed())
        .expect("static response parts")
}

fn wants_upgrade(req: &Request<Incoming>) -> bool {
    req.headers().contains_key(UPGRADE)
        && req
            .headers()
            .get_all(CONNECTION)
            .iter()
            .any(|v| v.to_str().is_ok_and(|s| s.to_ascii_lowercase().contains("upgrade")))
}

async fn forward(state: ProxyState, peer: SocketAddr, mut req: Request<Incoming>) -> Response<Body> {
    let path = req.uri().path().to_owned();
    let Some(route) = state.routes.resolve(&path) else {
        return json_error(StatusCode::NOT_FOUND, "no_route", &format!("no route for {path}"));
    };
    if let Some(signer) = &state.signer {
        let now = chrono::Utc::now().timestamp();
        let ok = req
            .headers()
            .get_all(hyper::header::COOKIE)
            .iter()
            .filter_map(|h| h.to_str().ok())
            .flat_map(cookie_values)
            .any(|v| signer.verify(&route.prefix, v, now));
        if !ok {
            return json_error(StatusCode::FORBIDDEN, "route_forbidden", "missing or invalid route cookie");
        }
    }

    let forwarded = match req.headers().get("x-forwarded-for").and_then(|v| v.to_str().ok()) {
        Some(prev) => format!("{prev}, {}", peer.ip()),
        None => peer.ip().to_string(),
    };
    if let Ok(v) = HeaderValue::from_str(&forwarded) {
        req.headers_mut().insert("x-forwarded-for", v);
    }
    let upgrade = wants_upgrade(&req);
    let client_upgrade = upgrade.then(|| hyper::upgrade::on(&mut req));

    let stream = match TcpStream::connect(&route.upstream).await {
        Ok(s) => s,
        Err(e) => return json_error(StatusCode::BAD_GATEWAY, "bad_gateway", &format!("{}: {e}", route.upstream)),
    };
    let (mut sender, conn) = match hyper::client::conn::http1::handshake(TokioIo::new(stream)).await {
        Ok(pair) => pair,
        Err(e) => return json_error(StatusCode::BAD_GATEWAY, "bad_gateway", &e.to_string()),
    };
    tokio::spawn(async move {
        let _ = conn.with_upgrades().await;
    });

    let mut resp = match sender.send_request(req).await {
        Ok(r) => r,
        Err(e) => return json_error(StatusCode::BAD_GATEWAY, "bad_gateway", &e.to_string()),
    };
    if resp.status() == StatusCode::SWITCHING_PROTOCOLS {
        if let Some(client_upgrade) = client_upgrade {
            let upstream_upgrade = hyper::upgrade::on(&mut resp);
            tokio::spawn(async move {
                if let (Ok(client), Ok(upstream)) = tokio::join!(client_upgrade, upstream_upgrade) {
                    let _ = tokio::io::copy_bidirectional(&mut TokioIo::new(client), &mut TokioIo::new(upstream)).await;
                }
            });
        }
    }
    resp.map(|b| b.boxed())
}

/// Accepts connections until `shutdown` resolves.
pub async fn serve(listener: TcpListener, state: ProxyState, shutdown: impl Future<Output = ()>) {
    tokio::pin!(shutdown);
    loop {
        let (stream, peer) = tokio::select! {
            _ = &mut shutdown => return,
            accepted = listener.accept() => match accepted {
                Ok(pair) => pair,
                Err(e) => {
                    tracing::warn!("proxy accept failed: {e}");
                    continue;
                }
            },
        };
        let state = state.clone();
        tokio::spawn(async move {
            let service = hyper::service::service_fn(move |req| {
                let state = state.clone();
                async move { Ok::<_, Infallible>(forward(state, peer, req).await) }
            });
            let _ = hyper::server::conn::http1::Builder::new()
                .serve_connection(TokioIo::new(stream), service)
                .with_upgrades()
                .await;
        });
    }
}
