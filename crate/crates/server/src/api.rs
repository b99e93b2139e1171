//! JSON API. Every mutating endpoint maps onto one hub operation and needs
//! a bearer session, except login.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path as FsPath, PathBuf};
use std::sync::Arc;

use axum::body::Body;
use axum::extract::rejection::JsonRejection;
use axum::extract::{FromRequest, FromRequestParts, Path, Query, Request, State};
use axum::http::request::Parts;
use axum::http::{header, HeaderMap, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Redirect, Response};
use axum::routing::{get, post};
use axum::Router;
use base64::Engine as _;
use hub_core::collab::{project_visibility, ProjectConfig};
use hub_core::containers::NewContainer;
use hub_core::reports::{PublishRequest, ReportSummary, SourceTree};
use hub_core::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::app::App;
use crate::runtime::{DriverError, LifecycleError};

type Shared = Arc<App>;

// ---------------------------------------------------------------- errors

#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        ApiError { status, code, message: message.into() }
    }

    fn unauthenticated() -> Self {
        ApiError::new(StatusCode::UNAUTHORIZED, "unauthenticated", "a valid bearer session is required")
    }
}

impl From<hub_core::Error> for ApiError {
    fn from(e: hub_core::Error) -> Self {
        let status = match e.kind() {
            ErrorKind::NotFound => StatusCode::NOT_FOUND,
            ErrorKind::Validation => StatusCode::UNPROCESSABLE_ENTITY,
            ErrorKind::Conflict => StatusCode::CONFLICT,
            ErrorKind::Forbidden => StatusCode::FORBIDDEN,
            ErrorKind::Internal => StatusCode::INTERNAL_SERVER_ERROR,
        };
        ApiError::new(status, e.code(), e.to_string())
    }
}

impl From<LifecycleError> for ApiError {
    fn from(e: LifecycleError) -> Self {
        match e {
            LifecycleError::Hub(e) => e.into(),
            LifecycleError::Driver(d) => {
                let status = match d {
                    DriverError::ImageNotFound(_) => StatusCode::UNPROCESSABLE_ENTITY,
                    DriverError::Unavailable(_) => StatusCode::SERVICE_UNAVAILABLE,
                    DriverError::StartTimeout(_) => StatusCode::GATEWAY_TIMEOUT,
                    DriverError::Failed(_) => StatusCode::BAD_GATEWAY,
                };
                ApiError::new(status, d.code(), d.to_string())
            }
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, axum::Json(json!({ "error": self.code, "message": self.message }))).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

/// JSON body whose rejections use the API error shape.
pub struct ApiJson<T>(pub T);

impl<T: DeserializeOwned, S: Send + Sync> FromRequest<S> for ApiJson<T> {
    type Rejection = ApiError;

    async fn from_request(req: Request, state: &S) -> Result<Self, ApiError> {
        match axum::Json::<T>::from_request(req, state).await {
            Ok(axum::Json(v)) => Ok(ApiJson(v)),
            Err(JsonRejection::JsonDataError(e)) => {
                Err(ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_body", e.body_text()))
            }
            Err(JsonRejection::MissingJsonContentType(e)) => {
                Err(ApiError::new(StatusCode::UNSUPPORTED_MEDIA_TYPE, "unsupported_media_type", e.body_text()))
            }
            Err(e) => Err(ApiError::new(StatusCode::BAD_REQUEST, "malformed_json", e.body_text())),
        }
    }
}

// ---------------------------------------------------------------- sessions

fn bearer(headers: &HeaderMap) -> Option<&str> {
    headers.get(header::AUTHORIZATION)?.to_str().ok()?.strip_prefix("Bearer ").map(str::trim)
}

/// An authenticated caller.
pub struct Caller {
    pub user_id: UserId,
    pub token: String,
}

impl FromRequestParts<Shared> for Caller {
    type Rejection = ApiError;

    async fn from_request_parts(parts: &mut Parts, app: &Shared) -> Result<Self, ApiError> {
        let token = bearer(&parts.headers).ok_or_else(ApiError::unauthenticated)?;
        let session = app.sessions.validate(token).ok_or_else(ApiError::unauthenticated)?;
        Ok(Caller { user_id: session.user_id, token: token.to_owned() })
    }
}

/// Anonymous when no credentials are sent; a bad token is still an error.
pub struct MaybeCaller(pub Viewer);

impl FromRequestParts<Shared> for MaybeCaller {
    type Rejection = ApiError;

    async fn from_request_parts(parts: &mut Parts, app: &Shared) -> Result<Self, ApiError> {
        if parts.headers.contains_key(header::AUTHORIZATION) {
            let c = Caller::from_request_parts(parts, app).await?;
            Ok(MaybeCaller(Viewer::User(c.user_id)))
        } else {
            Ok(MaybeCaller(Viewer::Anonymous))
        }
    }
}

#[derive(Deserialize)]
struct LoginBody {
    assertion: String,
}

async fn login(State(app): State<Shared>, ApiJson(body): ApiJson<LoginBody>) -> ApiResult<Response> {
    let identity = app
        .identity
        .authenticate(&body.assertion)
        .map_err(|e| ApiError::new(StatusCode::UNAUTHORIZED, "auth_rejected", e.to_string()))?;
    let user = match app.hub.user_by_name(&identity.username) {
        Ok(u) => u,
        Err(Error::UnknownUser(_)) if app.settings.auto_provision => {
            match app.hub.register_user(&identity.username, &identity.email) {
                Ok(u) => u,
                Err(Error::DuplicateUsername(_)) => app.hub.user_by_name(&identity.username)?,
                Err(e) => return Err(e.into()),
            }
        }
        Err(Error::UnknownUser(name)) => {
            return Err(ApiError::new(StatusCode::UNAUTHORIZED, "unknown_local_user", format!("{name} is not registered")))
        }
        Err(e) => return Err(e.into()),
    };
    let session = app.sessions.issue(user.user_id.clone());
    Ok(axum::Json(json!({
        "token": session.token,
        "expires_at": session.expires_at,
        "user": user,
    }))
    .into_response())
}

async fn logout(State(app): State<Shared>, caller: Caller) -> StatusCode {
    app.sessions.revoke(&caller.token);
    StatusCode::NO_CONTENT
}

// ---------------------------------------------------------------- projects

#[derive(Deserialize)]
struct NewProjectBody {
    name: String,
    #[serde(default = "private")]
    scope: Scope,
    image_ref: Option<String>,
}

fn private() -> Scope {
    Scope::Private
}

async fn list_projects(State(app): State<Shared>, MaybeCaller(viewer): MaybeCaller) -> impl IntoResponse {
    axum::Json(app.hub.list_projects(&viewer))
}

async fn create_project(
    State(app): State<Shared>,
    caller: Caller,
    ApiJson(body): ApiJson<NewProjectBody>,
) -> ApiResult<impl IntoResponse> {
    let image = body.image_ref.unwrap_or_else(|| app.hub.options().default_image.clone());
    let p = app.hub.create_project(&caller.user_id, &body.name, body.scope, &image)?;
    Ok((StatusCode::CREATED, axum::Json(p)))
}

async fn get_project(
    State(app): State<Shared>,
    MaybeCaller(viewer): MaybeCaller,
    Path(id): Path<ProjectId>,
) -> ApiResult<impl IntoResponse> {
    let p = app.hub.project(&id)?;
    if project_visibility(&p, &viewer).is_none() {
        return Err(Error::AccessDenied.into());
    }
    Ok(axum::Json(p))
}

async fn clone_project(State(app): State<Shared>, caller: Caller, Path(id): Path<ProjectId>) -> ApiResult<impl IntoResponse> {
    Ok((StatusCode::CREATED, axum::Json(app.hub.clone_project(&caller.user_id, &id)?)))
}

async fn join_project(State(app): State<Shared>, caller: Caller, Path(id): Path<ProjectId>) -> ApiResult<impl IntoResponse> {
    Ok(axum::Json(app.hub.join_project(&caller.user_id, &id)?))
}

async fn leave_project(State(app): State<Shared>, caller: Caller, Path(id): Path<ProjectId>) -> ApiResult<impl IntoResponse> {
    Ok(axum::Json(app.hub.leave_project(&caller.user_id, &id)?))
}

#[derive(Deserialize)]
struct CollaboratorBody {
    /// Username of the user to add.
    user: String,
    #[serde(default = "collaborator")]
    role: Role,
}

fn collaborator() -> Role {
    Role::Collaborator
}

async fn add_collaborator(
    State(app): State<Shared>,
    caller: Caller,
    Path(id): Path<ProjectId>,
    ApiJson(body): ApiJson<CollaboratorBody>,
) -> ApiResult<impl IntoResponse> {
    let user = app.hub.user_by_name(&body.user)?;
    Ok(axum::Json(app.hub.add_collaborator(&caller.user_id, &id, &user.user_id, body.role)?))
}

#[derive(Deserialize)]
struct ScopeBody {
    scope: Scope,
}

async fn set_project_scope(
    State(app): State<Shared>,
    caller: Caller,
    Path(id): Path<ProjectId>,
    ApiJson(body): ApiJson<ScopeBody>,
) -> ApiResult<impl IntoResponse> {
    Ok(axum::Json(app.hub.set_project_scope(&caller.user_id, &id, body.scope)?))
}

async fn configure_project(
    State(app): State<Shared>,
    caller: Caller,
    Path(id): Path<ProjectId>,
    ApiJson(body): ApiJson<ProjectConfig>,
) -> ApiResult<impl IntoResponse> {
    Ok(axum::Json(app.hub.configure_project(&caller.user_id, &id, &body)?))
}

// ---------------------------------------------------------------- containers

#[derive(Serialize)]
struct ContainerView {
    #[serde(flatten)]
    container: Container,
    /// Proxy path of the running container.
    url: Option<String>,
}

impl From<Container> for ContainerView {
    fn from(c: Container) -> Self {
        let url = (c.state == ContainerState::Running).then(|| format!("{}/", crate::runtime::route_prefix(&c)));
        ContainerView { container: c, url }
    }
}

/// Response with a route cookie attached when the container is running.
fn with_route_cookie(app: &App, status: StatusCode, c: Container) -> Response {
    let cookie = (c.state == ContainerState::Running).then(|| {
        let expires = (chrono::Utc::now() + chrono::Duration::from_std(app.settings.session_ttl).unwrap_or_default()).timestamp();
        app.signer.set_cookie(&crate::runtime::route_prefix(&c), expires)
    });
    let mut resp = (status, axum::Json(ContainerView::from(c))).into_response();
    if let Some(v) = cookie.and_then(|c| HeaderValue::from_str(&c).ok()) {
        resp.headers_mut().insert(header::SET_COOKIE, v);
    }
    resp
}

fn owned_container(app: &App, caller: &Caller, id: &ContainerId) -> ApiResult<Container> {
    let c = app.hub.container(id)?;
    if c.owner_id != caller.user_id || !c.is_notebook() {
        return Err(Error::NotAuthorized.into());
    }
    Ok(c)
}

#[derive(Deserialize)]
struct NewContainerBody {
    name: String,
    image_ref: Option<String>,
    #[serde(default)]
    project_ids: Vec<ProjectId>,
    #[serde(default)]
    functional_volume_ids: Vec<VolumeId>,
}

async fn list_containers(State(app): State<Shared>, caller: Caller) -> impl IntoResponse {
    let list: Vec<ContainerView> = app.hub.list_containers(&caller.user_id).into_iter().map(Into::into).collect();
    axum::Json(list)
}

async fn create_container(
    State(app): State<Shared>,
    caller: Caller,
    ApiJson(body): ApiJson<NewContainerBody>,
) -> ApiResult<impl IntoResponse> {
    let c = app.hub.create_container(
        &caller.user_id,
        NewContainer {
            name: body.name,
            image_ref: body.image_ref,
            project_ids: body.project_ids,
            functional_volume_ids: body.functional_volume_ids,
        },
    )?;
    Ok((StatusCode::CREATED, axum::Json(ContainerView::from(c))))
}

async fn get_container(State(app): State<Shared>, caller: Caller, Path(id): Path<ContainerId>) -> ApiResult<Response> {
    owned_container(&app, &caller, &id)?;
    let c = app.lifecycle.inspect(&id).await?;
    Ok(with_route_cookie(&app, StatusCode::OK, c))
}

async fn start_container(State(app): State<Shared>, caller: Caller, Path(id): Path<ContainerId>) -> ApiResult<Response> {
    owned_container(&app, &caller, &id)?;
    let c = app.lifecycle.request_start(&id).await?;
    Ok(with_route_cookie(&app, StatusCode::ACCEPTED, c))
}

async fn stop_container(State(app): State<Shared>, caller: Caller, Path(id): Path<ContainerId>) -> ApiResult<impl IntoResponse> {
    owned_container(&app, &caller, &id)?;
    Ok(axum::Json(ContainerView::from(app.lifecycle.stop(&id).await?)))
}

async fn usage(State(app): State<Shared>, caller: Caller) -> impl IntoResponse {
    axum::Json(app.lifecycle.usage(Some(&caller.user_id)).await)
}

// ---------------------------------------------------------------- reports

#[derive(Deserialize)]
#[serde(rename_all = "snake_case")]
enum SourceBody {
    /// relative path → base64 content
    Files(BTreeMap<String, String>),
    /// Sub-folder of the caller's prepare folder in the project.
    PrepareDir(String),
}

#[derive(Deserialize)]
struct PublishBody {
    project_id: ProjectId,
    name: String,
    #[serde(default = "static_bundle")]
    kind: ReportKind,
    #[serde(default = "private")]
    scope: Scope,
    password: Option<String>,
    source: SourceBody,
}

fn static_bundle() -> ReportKind {
    ReportKind::StaticBundle
}

async fn list_reports(State(app): State<Shared>, MaybeCaller(viewer): MaybeCaller) -> impl IntoResponse {
    axum::Json(app.hub.list_reports(&viewer))
}

async fn publish_report(
    State(app): State<Shared>,
    caller: Caller,
    ApiJson(body): ApiJson<PublishBody>,
) -> ApiResult<impl IntoResponse> {
    let source = match body.source {
        SourceBody::Files(files) => {
            let mut decoded = BTreeMap::new();
            for (path, b64) in files {
                let bytes = base64::engine::general_purpose::STANDARD
                    .decode(b64)
                    .map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_body", format!("{path}: {e}")))?;
                decoded.insert(path, bytes);
            }
            SourceTree::Files(decoded)
        }
        SourceBody::PrepareDir(sub) => {
            let user = app.hub.user(&caller.user_id)?;
            let base = app.hub.layout().resolve(&Layout::project_prepare(&body.project_id, &user.username));
            if !sub.is_empty() {
                hub_core::layout::check_relative(&sub)?;
            }
            SourceTree::Dir(if sub.is_empty() { base } else { base.join(sub) })
        }
    };
    let r = app.hub.publish_report(
        &caller.user_id,
        PublishRequest {
            project: body.project_id,
            name: body.name,
            source,
            kind: body.kind,
            scope: body.scope,
            password: body.password,
        },
    )?;
    Ok((StatusCode::CREATED, axum::Json(ReportSummary::from(&r))))
}

#[derive(Deserialize, Default)]
struct OpenQuery {
    version: Option<u32>,
    password: Option<String>,
}

fn report_password(headers: &HeaderMap, query: &OpenQuery) -> Option<String> {
    headers
        .get("x-report-password")
        .and_then(|v| v.to_str().ok())
        .map(str::to_owned)
        .or_else(|| query.password.clone())
}

#[derive(Serialize)]
struct OpenedView {
    #[serde(flatten)]
    summary: ReportSummary,
    version: u32,
    content_digest: String,
    url: String,
    /// Served apps only: state of the backing container.
    state: Option<ContainerState>,
}

async fn open_report(
    State(app): State<Shared>,
    MaybeCaller(viewer): MaybeCaller,
    Path(id): Path<ReportId>,
    Query(query): Query<OpenQuery>,
    headers: HeaderMap,
) -> ApiResult<Response> {
    let password = report_password(&headers, &query);
    let opened = app.hub.open_report(&viewer, &id, query.version, password.as_deref())?;
    let v = opened.version.version;
    let mut view = OpenedView {
        summary: opened.summary,
        version: v,
        content_digest: opened.version.content_digest.clone(),
        url: format!("/reports/{id}/v{v}/"),
        state: None,
    };
    if opened.version.kind == ReportKind::StaticBundle {
        return Ok(axum::Json(view).into_response());
    }
    let c = app.hub.report_app_container(&id, v)?;
    let c = app.lifecycle.request_start(&c.container_id).await?;
    let prefix = crate::runtime::route_prefix(&c);
    view.url = format!("{prefix}/");
    view.state = Some(c.state);
    let expires = (chrono::Utc::now() + chrono::Duration::from_std(app.settings.session_ttl).unwrap_or_default()).timestamp();
    let mut resp = axum::Json(view).into_response();
    if let Ok(v) = HeaderValue::from_str(&app.signer.set_cookie(&prefix, expires)) {
        resp.headers_mut().insert(header::SET_COOKIE, v);
    }
    Ok(resp)
}

async fn set_report_scope(
    State(app): State<Shared>,
    caller: Caller,
    Path(id): Path<ReportId>,
    ApiJson(body): ApiJson<ScopeBody>,
) -> ApiResult<impl IntoResponse> {
    Ok(axum::Json(app.hub.set_report_scope(&caller.user_id, &id, body.scope)?))
}

#[derive(Deserialize)]
struct PasswordBody {
    password: Option<String>,
}

async fn set_report_password(
    State(app): State<Shared>,
    caller: Caller,
    Path(id): Path<ReportId>,
    ApiJson(body): ApiJson<PasswordBody>,
) -> ApiResult<impl IntoResponse> {
    Ok(axum::Json(app.hub.set_report_password(&caller.user_id, &id, body.password.as_deref())?))
}

#[derive(Deserialize)]
struct DeleteQuery {
    version: Option<u32>,
}

async fn delete_report(
    State(app): State<Shared>,
    caller: Caller,
    Path(id): Path<ReportId>,
    Query(query): Query<DeleteQuery>,
) -> ApiResult<impl IntoResponse> {
    let deletion = app.hub.delete_report(&caller.user_id, &id, query.version)?;
    let removed: BTreeSet<u32> = deletion.removed_versions.iter().copied().collect();
    let apps: Vec<ContainerId> = app
        .hub
        .state()
        .containers
        .values()
        .filter(|c| matches!(&c.purpose, ContainerPurpose::ReportApp { report_id, version } if *report_id == id && removed.contains(version)))
        .map(|c| c.container_id.clone())
        .collect();
    for cid in apps {
        app.lifecycle.stop(&cid).await?;
        app.hub.forget_container(&cid)?;
    }
    Ok(axum::Json(json!({
        "removed_versions": deletion.removed_versions,
        "report_removed": deletion.report_removed,
    })))
}

/// Reads `rel` under `root`, defaulting directories to `index.html`.
async fn serve_file(root: &FsPath, rel: &str) -> Response {
    let rel = if rel.is_empty() || rel.ends_with('/') { format!("{rel}index.html") } else { rel.to_owned() };
    if rel.split('/').any(|s| s.is_empty() || s == "." || s == "..") || rel.contains('\\') {
        return ApiError::new(StatusCode::BAD_REQUEST, "invalid_path", rel).into_response();
    }
    let path: PathBuf = root.join(&rel);
    match tokio::fs::read(&path).await {
        Ok(bytes) => {
            let mime = mime_guess::from_path(&rel).first_or_octet_stream();
            ([(header::CONTENT_TYPE, mime.to_string())], Body::from(bytes)).into_response()
        }
        Err(_) => ApiError::new(StatusCode::NOT_FOUND, "not_found", format!("{rel} not found")).into_response(),
    }
}

fn parse_version(segment: &str) -> ApiResult<Option<u32>> {
    if segment == "latest" {
        return Ok(None);
    }
    segment
        .strip_prefix('v')
        .and_then(|n| n.parse().ok())
        .map(Some)
        .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, "unknown_version", format!("no version {segment}")))
}

async fn report_content(
    State(app): State<Shared>,
    MaybeCaller(viewer): MaybeCaller,
    Path((id, version, rest)): Path<(ReportId, String, String)>,
    Query(query): Query<OpenQuery>,
    headers: HeaderMap,
) -> ApiResult<Response> {
    let password = report_password(&headers, &query);
    let opened = app.hub.open_report(&viewer, &id, parse_version(&version)?, password.as_deref())?;
    Ok(serve_file(&opened.content_dir, &rest).await)
}

async fn report_content_root(
    state: State<Shared>,
    viewer: MaybeCaller,
    Path((id, version)): Path<(ReportId, String)>,
    query: Query<OpenQuery>,
    headers: HeaderMap,
) -> ApiResult<Response> {
    report_content(state, viewer, Path((id, version, String::new())), query, headers).await
}

async fn report_content_redirect(Path((id, version)): Path<(String, String)>) -> Redirect {
    Redirect::permanent(&format!("/reports/{id}/{version}/"))
}

// ---------------------------------------------------------------- volumes & bindings

#[derive(Deserialize)]
struct NewVolumeBody {
    name: String,
    #[serde(default = "functional")]
    kind: VolumeKind,
}

fn functional() -> VolumeKind {
    VolumeKind::Functional
}

async fn list_volumes(State(app): State<Shared>, _caller: Caller) -> impl IntoResponse {
    axum::Json(app.hub.list_volumes())
}

/// Users may create functional volumes they maintain; storage volumes are
/// provisioned by the operator through the CLI.
async fn create_volume(
    State(app): State<Shared>,
    caller: Caller,
    ApiJson(body): ApiJson<NewVolumeBody>,
) -> ApiResult<impl IntoResponse> {
    if body.kind != VolumeKind::Functional {
        return Err(Error::NotAuthorized.into());
    }
    let v = app.hub.create_volume(&body.name, VolumeKind::Functional, Some(caller.user_id), BTreeSet::new())?;
    Ok((StatusCode::CREATED, axum::Json(v)))
}

#[derive(Deserialize)]
struct NewBindingBody {
    service_kind: ServiceKind,
    endpoint: String,
    credential: Credential,
    folder_label: String,
}

fn redact(mut b: ServiceBinding) -> ServiceBinding {
    b.credential = b.credential.redacted();
    b
}

async fn list_bindings(State(app): State<Shared>, caller: Caller) -> impl IntoResponse {
    let list: Vec<ServiceBinding> = app.hub.list_bindings(&caller.user_id).into_iter().map(redact).collect();
    axum::Json(list)
}

async fn create_binding(
    State(app): State<Shared>,
    caller: Caller,
    ApiJson(body): ApiJson<NewBindingBody>,
) -> ApiResult<impl IntoResponse> {
    let b = app.hub.add_binding(&caller.user_id, body.service_kind, &body.endpoint, body.credential, &body.folder_label)?;
    Ok((StatusCode::CREATED, axum::Json(redact(b))))
}

// ---------------------------------------------------------------- misc

async fn healthz() -> impl IntoResponse {
    axum::Json(json!({ "status": "ok" }))
}

const ENDPOINTS: &[(&str, &str, &str)] = &[
    ("POST", "/auth/login", "exchange an identity assertion for a session"),
    ("POST", "/auth/logout", "revoke the current session"),
    ("GET", "/projects", "projects visible to the caller"),
    ("POST", "/projects", "create a project owned by the caller"),
    ("GET", "/projects/{id}", "one project"),
    ("POST", "/projects/{id}/clone", "clone into a new private project"),
    ("POST", "/projects/{id}/join", "join an internal or public project"),
    ("POST", "/projects/{id}/leave", "leave a project"),
    ("POST", "/projects/{id}/collaborators", "add or re-role a member"),
    ("POST", "/projects/{id}/scope", "change project scope"),
    ("POST", "/projects/{id}/config", "image, volumes and share mode"),
    ("GET", "/containers", "the caller's containers"),
    ("POST", "/containers", "create a container"),
    ("GET", "/containers/{id}", "container state and route url"),
    ("POST", "/containers/{id}/start", "start asynchronously"),
    ("POST", "/containers/{id}/stop", "stop"),
    ("GET", "/usage", "usage samples of the caller's running containers"),
    ("GET", "/reports", "reports visible to the caller"),
    ("POST", "/reports", "publish a report version"),
    ("GET", "/reports/{id}", "open a report (?version=, ?password=)"),
    ("POST", "/reports/{id}/scope", "change report scope"),
    ("POST", "/reports/{id}/password", "set or clear the report password"),
    ("DELETE", "/reports/{id}", "delete one version (?version=) or all"),
    ("GET", "/reports/{id}/{latest|vN}/{path}", "static report content"),
    ("GET", "/volumes", "all volumes"),
    ("POST", "/volumes", "create a functional volume maintained by the caller"),
    ("GET", "/bindings", "the caller's service bindings"),
    ("POST", "/bindings", "add a service binding"),
    ("GET", "/healthz", "liveness"),
    ("GET", "/api/spec", "this document"),
];

async fn api_spec() -> impl IntoResponse {
    let paths: Vec<_> =
        ENDPOINTS.iter().map(|(m, p, d)| json!({ "method": m, "path": p, "summary": d })).collect();
    axum::Json(json!({
        "title": "hub API",
        "version": env!("CARGO_PKG_VERSION"),
        "authentication": "Authorization: Bearer <token> from POST /auth/login",
        "errors": "{\"error\": <code>, \"message\": <text>}",
        "endpoints": paths,
    }))
}

const UI_PLACEHOLDER: &str = "<!doctype html><title>hub</title><p>The web dashboard is not installed. The JSON API is described at <a href=\"/api/spec\">/api/spec</a>.</p>";

async fn ui(State(app): State<Shared>, path: Option<Path<String>>) -> Response {
    let rel = path.map(|Path(p)| p).unwrap_or_default();
    match &app.settings.ui_dir {
        Some(dir) => serve_file(dir, &rel).await,
        None => ([(header::CONTENT_TYPE, "text/html; charset=utf-8")], UI_PLACEHOLDER).into_response(),
    }
}

async fn fallback() -> ApiError {
    ApiError::new(StatusCode::NOT_FOUND, "not_found", "no such endpoint")
}

pub fn router(app: Shared) -> Router {
    Router::new()
        .route("/auth/login", post(login))
        .route("/auth/logout", post(logout))
        .route("/projects", get(list_projects).post(create_project))
        .route("/projects/{id}", get(get_project))
        .route("/projects/{id}/clone", post(clone_project))
        .route("/projects/{id}/join", post(join_project))
        .route("/projects/{id}/leave", post(leave_project))
        .route("/projects/{id}/collaborators", post(add_collaborator))
        .route("/projects/{id}/scope", post(set_project_scope))
        .route("/projects/{id}/config", post(configure_project))
        .route("/containers", get(list_containers).post(create_container))
        .route("/containers/{id}", get(get_container))
        .route("/containers/{id}/start", post(start_container))
        .route("/containers/{id}/stop", post(stop_container))
        .route("/usage", get(usage))
        .route("/reports", get(list_reports).post(publish_report))
        .route("/reports/{id}", get(open_report).delete(delete_report))
        .route("/reports/{id}/scope", post(set_report_scope))
        .route("/reports/{id}/password", post(set_report_password))
        .route("/reports/{id}/{version}", get(report_content_redirect))
        .route("/reports/{id}/{version}/", get(report_content_root))
        .route("/reports/{id}/{version}/{*path}", get(report_content))
        .route("/volumes", get(list_volumes).post(create_volume))
        .route("/bindings", get(list_bindings).post(create_binding))
        .route("/healthz", get(healthz))
        .route("/api/spec", get(api_spec))
        .route("/ui", get(|| async { Redirect::permanent("/ui/") }))
        .route("/ui/", get(ui))
        .route("/ui/{*path}", get(ui))
        .fallback(fallback)
        .with_state(app)
}
