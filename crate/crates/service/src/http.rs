//! HTTP routes over a [`Repository`].

use std::net::SocketAddr;
use std::path::{Component, Path as FsPath, PathBuf};
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, Path, Query, RawQuery, State};
use axum::http::{header, HeaderMap, HeaderValue, StatusCode, Uri};
use axum::response::{IntoResponse, Redirect, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use depot3d_core::catalog::{schema_descriptor, Deposit, MediaRole};
use depot3d_core::vocab::Scheme;
use serde::Deserialize;
use serde_json::json;

use crate::auth::Caller;
use crate::error::ServiceError;
use crate::links::{Fetcher, HttpFetcher};
use crate::repo::{DocumentContent, ExternalDocument, Repository};
use crate::search::SearchQuery;

pub const MAX_UPLOAD_BYTES: usize = 1 << 30;

#[derive(Clone)]
pub struct AppState {
    pub repo: Arc<Repository>,
    pub fetcher: Arc<dyn Fetcher>,
}

impl AppState {
    pub fn new(repo: Arc<Repository>) -> Self {
        AppState {
            repo,
            fetcher: Arc::new(HttpFetcher::default()),
        }
    }
}

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.http_status()).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        (status, Json(self.body())).into_response()
    }
}

type ApiResult<T> = Result<T, ServiceError>;

fn caller(repo: &Repository, headers: &HeaderMap) -> ApiResult<Caller> {
    let token = match headers.get(header::AUTHORIZATION) {
        None => None,
        Some(v) => {
            let v = v
                .to_str()
                .map_err(|_| ServiceError::Unauthorized("malformed Authorization header".into()))?;
            Some(
                v.strip_prefix("Bearer ")
                    .ok_or_else(|| ServiceError::Unauthorized("expected a Bearer token".into()))?
                    .trim(),
            )
        }
    };
    repo.caller(token)
}

/// Runs repository work off the async executor.
async fn blocking<T: Send + 'static>(f: impl FnOnce() -> ApiResult<T> + Send + 'static) -> ApiResult<T> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ServiceError::Io(format!("worker failed: {e}")))?
}

fn parse_json<T: serde::de::DeserializeOwned>(body: &[u8]) -> ApiResult<T> {
    serde_json::from_slice(body).map_err(|e| ServiceError::BadRequest(format!("unreadable JSON: {e}")))
}

pub fn router(state: AppState) -> Router {
    let static_dir = state.repo.config().static_dir.clone();
    let api = Router::new()
        .route("/api/schema", get(schema))
        .route("/api/vocab/{scheme}", get(vocab_search))
        .route("/api/deposits", post(create_deposit).get(list_deposits))
        .route("/api/deposits/{id}", get(get_deposit).put(put_deposit))
        .route("/api/deposits/{id}/validation", get(validation))
        .route("/api/deposits/{id}/objects/{oid}/documents", post(add_document))
        .route("/api/deposits/{id}/objects/{oid}/documents/{filename}", get(get_document))
        .route("/api/deposits/{id}/objects/{oid}/preview", get(preview))
        .route("/api/deposits/{id}/publish", post(publish))
        .route("/api/deposits/{id}/versions", post(new_version))
        .route("/api/deposits/{id}/publications", post(link_publication))
        .route("/api/deposits/{id}/links", get(links))
        .route("/api/deposits/{id}/package", get(package))
        .route("/api/search", get(search))
        .route("/oai", get(oai_get).post(oai_post))
        .layer(DefaultBodyLimit::max(MAX_UPLOAD_BYTES));
    let api = match static_dir {
        Some(dir) => api.fallback(move |uri: Uri| serve_static(dir.clone(), uri)),
        None => api,
    };
    api.with_state(state)
}

async fn schema() -> impl IntoResponse {
    Json(schema_descriptor())
}

#[derive(Deserialize)]
struct VocabParams {
    #[serde(default)]
    q: String,
    limit: Option<usize>,
}

async fn vocab_search(
    State(s): State<AppState>,
    Path(scheme): Path<String>,
    Query(p): Query<VocabParams>,
) -> ApiResult<impl IntoResponse> {
    let scheme: Scheme = scheme
        .parse()
        .map_err(|e: depot3d_core::vocab::VocabError| ServiceError::NotFound(e.to_string()))?;
    let entries = s
        .repo
        .vocab()
        .search(&scheme, &p.q, p.limit.unwrap_or(10).min(100))
        .map_err(|e| ServiceError::NotFound(e.to_string()))?;
    Ok(Json(json!(entries)))
}

async fn create_deposit(State(s): State<AppState>, headers: HeaderMap, body: Bytes) -> ApiResult<impl IntoResponse> {
    let c = caller(&s.repo, &headers)?;
    let d: Deposit = parse_json(&body)?;
    let repo = s.repo.clone();
    let id = blocking(move || repo.create_deposit(&c, d)).await?;
    Ok((StatusCode::CREATED, Json(json!({ "local_id": id, "revision": 1 }))))
}

async fn list_deposits(State(s): State<AppState>, headers: HeaderMap) -> ApiResult<impl IntoResponse> {
    let c = caller(&s.repo, &headers)?;
    Ok(Json(s.repo.list_editable(&c)?))
}

async fn get_deposit(State(s): State<AppState>, headers: HeaderMap, Path(id): Path<u64>) -> ApiResult<impl IntoResponse> {
    let c = caller(&s.repo, &headers)?;
    let repo = s.repo.clone();
    Ok(Json(blocking(move || repo.get_deposit(&c, id)).await?))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PutDeposit {
    revision: u64,
    deposit: Deposit,
}

async fn put_deposit(
    State(s): State<AppState>,
    headers: HeaderMap,
    Path(id): Path<u64>,
    body: Bytes,
) -> ApiResult<impl IntoResponse> {
    let c = caller(&s.repo, &headers)?;
    let put: PutDeposit = parse_json(&body)?;
    let repo = s.repo.clone();
    let revision = blocking(move || repo.update_draft(&c, id, put.revision, put.deposit)).await?;
    Ok(Json(json!({ "local_id": id, "revision": revision })))
}

async fn validation(State(s): State<AppState>, headers: HeaderMap, Path(id): Path<u64>) -> ApiResult<impl IntoResponse> {
    let c = caller(&s.repo, &headers)?;
    let repo = s.repo.clone();
    Ok(Json(blocking(move || repo.validation(&c, id)).await?))
}

#[derive(Deserialize)]
struct UploadParams {
    filename: Option<String>,
    role: Option<String>,
}

/// Raw bytes with `?filename=&role=`, or a JSON external reference when the
/// content type is `application/json`.
async fn add_document(
    State(s): State<AppState>,
    headers: HeaderMap,
    Path((id, oid)): Path<(u64, u64)>,
    Query(p): Query<UploadParams>,
    body: Bytes,
) -> ApiResult<impl IntoResponse> {
    let c = caller(&s.repo, &headers)?;
    let is_json = headers
        .get(header::CONTENT_TYPE)
        .and_then(|v| v.to_str().ok())
        .is_some_and(|v| v.starts_with("application/json"));
    let repo = s.repo.clone();
    if is_json {
        let ext: ExternalDocument = parse_json(&body)?;
        let (document, revision) = blocking(move || repo.add_external_document(&c, id, oid, ext)).await?;
        return Ok((StatusCode::CREATED, Json(json!({ "document": document, "revision": revision }))));
    }
    let filename = p
        .filename
        .ok_or_else(|| ServiceError::BadRequest("filename query parameter is required".into()))?;
    let role = p
        .role
        .map(|r| MediaRole::parse(&r).ok_or_else(|| ServiceError::BadRequest(format!("unknown media role '{r}'"))))
        .transpose()?;
    let out = blocking(move || repo.upload_document(&c, id, oid, &filename, role, &body)).await?;
    Ok((StatusCode::CREATED, Json(json!(out))))
}

async fn get_document(
    State(s): State<AppState>,
    headers: HeaderMap,
    Path((id, oid, filename)): Path<(u64, u64, String)>,
) -> ApiResult<Response> {
    let c = caller(&s.repo, &headers)?;
    let repo = s.repo.clone();
    match blocking(move || repo.document_content(&c, id, oid, &filename)).await? {
        DocumentContent::Bytes(b) => Ok(([(header::CONTENT_TYPE, "application/octet-stream")], b).into_response()),
        DocumentContent::External(url) => Ok(Redirect::temporary(&url).into_response()),
    }
}

fn attachment(name: &str) -> HeaderValue {
    HeaderValue::from_str(&format!("attachment; filename=\"{name}\""))
        .unwrap_or_else(|_| HeaderValue::from_static("attachment"))
}

async fn preview(
    State(s): State<AppState>,
    headers: HeaderMap,
    Path((id, oid)): Path<(u64, u64)>,
) -> ApiResult<Response> {
    let c = caller(&s.repo, &headers)?;
    let repo = s.repo.clone();
    let (name, bytes) = blocking(move || repo.preview(&c, id, oid)).await?;
    Ok((
        [
            (header::CONTENT_TYPE, HeaderValue::from_static("application/octet-stream")),
            (header::CONTENT_DISPOSITION, attachment(&name)),
        ],
        bytes,
    )
        .into_response())
}

async fn publish(
    State(s): State<AppState>,
    headers: HeaderMap,
    Path(id): Path<u64>,
    // Drained so the connection can be reused even when a client sends a body.
    _body: Bytes,
) -> ApiResult<impl IntoResponse> {
    let c = caller(&s.repo, &headers)?;
    let repo = s.repo.clone();
    Ok(Json(blocking(move || repo.publish(&c, id)).await?))
}

async fn new_version(
    State(s): State<AppState>,
    headers: HeaderMap,
    Path(id): Path<u64>,
    // Drained so the connection can be reused even when a client sends a body.
    _body: Bytes,
) -> ApiResult<impl IntoResponse> {
    let c = caller(&s.repo, &headers)?;
    let repo = s.repo.clone();
    let new_id = blocking(move || repo.new_version(&c, id)).await?;
    Ok((StatusCode::CREATED, Json(json!({ "local_id": new_id, "revision": 1 }))))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct LinkBody {
    id: String,
}

async fn link_publication(
    State(s): State<AppState>,
    headers: HeaderMap,
    Path(id): Path<u64>,
    body: Bytes,
) -> ApiResult<impl IntoResponse> {
    let c = caller(&s.repo, &headers)?;
    let b: LinkBody = parse_json(&body)?;
    let repo = s.repo.clone();
    let revision = blocking(move || repo.link_publication(&c, id, &b.id)).await?;
    Ok(Json(json!({ "local_id": id, "revision": revision })))
}

async fn links(State(s): State<AppState>, headers: HeaderMap, Path(id): Path<u64>) -> ApiResult<impl IntoResponse> {
    let c = caller(&s.repo, &headers)?;
    let repo = s.repo.clone();
    let fetcher = s.fetcher.clone();
    Ok(Json(blocking(move || repo.check_links(&c, id, fetcher.as_ref())).await?))
}

async fn package(State(s): State<AppState>, headers: HeaderMap, Path(id): Path<u64>) -> ApiResult<Response> {
    let c = caller(&s.repo, &headers)?;
    let repo = s.repo.clone();
    let bytes = blocking(move || repo.package_tar(&c, id)).await?;
    Ok((
        [
            (header::CONTENT_TYPE, HeaderValue::from_static("application/x-tar")),
            (header::CONTENT_DISPOSITION, attachment(&format!("deposit-{id}.tar"))),
        ],
        bytes,
    )
        .into_response())
}

async fn search(
    State(s): State<AppState>,
    headers: HeaderMap,
    Query(q): Query<SearchQuery>,
) -> ApiResult<impl IntoResponse> {
    let c = caller(&s.repo, &headers)?;
    Ok(Json(s.repo.search(&c, &q)))
}

fn oai_response(repo: &Repository, query: &str) -> Response {
    let args: Vec<(String, String)> = url::form_urlencoded::parse(query.as_bytes()).into_owned().collect();
    (
        [(header::CONTENT_TYPE, "text/xml; charset=utf-8")],
        repo.oai(&args),
    )
        .into_response()
}

async fn oai_get(State(s): State<AppState>, RawQuery(q): RawQuery) -> Response {
    oai_response(&s.repo, q.as_deref().unwrap_or(""))
}

async fn oai_post(State(s): State<AppState>, body: Bytes) -> Response {
    oai_response(&s.repo, &String::from_utf8_lossy(&body))
}

fn static_path(root: &FsPath, uri: &Uri) -> Option<PathBuf> {
    let rel = uri.path().trim_start_matches('/');
    let mut path = root.to_path_buf();
    for c in FsPath::new(rel).components() {
        match c {
            Component::Normal(p) => path.push(p),
            _ => return None,
        }
    }
    Some(path)
}

/// Serves the built web client; unknown paths get `index.html` so client
/// side routes work.
async fn serve_static(root: PathBuf, uri: Uri) -> Response {
    let Some(path) = static_path(&root, &uri) else {
        return StatusCode::BAD_REQUEST.into_response();
    };
    let path = if path.is_file() { path } else { root.join("index.html") };
    match tokio::fs::read(&path).await {
        Ok(bytes) => {
            let mime = match path.extension().and_then(|e| e.to_str()) {
                Some("html") => "text/html; charset=utf-8",
                Some("js") => "text/javascript",
                Some("css") => "text/css",
                Some("json") => "application/json",
                Some("svg") => "image/svg+xml",
                Some("png") => "image/png",
                _ => "application/octet-stream",
            };
            ([(header::CONTENT_TYPE, mime)], bytes).into_response()
        }
        Err(_) => StatusCode::NOT_FOUND.into_response(),
    }
}

/// Serves until ctrl-c.
pub async fn serve(state: AppState, listener: tokio::net::TcpListener) -> std::io::Result<()> {
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

/// A server on its own runtime thread, stopped when dropped. Used by tests
/// and by tools that need a throwaway repository.
pub struct BackgroundServer {
    pub addr: SocketAddr,
    shutdown: Option<tokio::sync::oneshot::Sender<()>>,
    thread: Option<std::thread::JoinHandle<()>>,
}

impl BackgroundServer {
    pub fn start(state: AppState, addr: SocketAddr) -> std::io::Result<Self> {
        let std_listener = std::net::TcpListener::bind(addr)?;
        std_listener.set_nonblocking(true)?;
        let addr = std_listener.local_addr()?;
        let (tx, rx) = tokio::sync::oneshot::channel::<()>();
        let rt = tokio::runtime::Builder::new_multi_thread()
            .worker_threads(2)
            .enable_all()
            .build()?;
        let thread = std::thread::spawn(move || {
            rt.block_on(async move {
                let listener = match tokio::net::TcpListener::from_std(std_listener) {
                    Ok(l) => l,
                    Err(e) => {
                        log::error!("cannot start listener: {e}");
                        return;
                    }
                };
                let server = axum::serve(listener, router(state)).with_graceful_shutdown(async {
                    let _ = rx.await;
                });
                if let Err(e) = server.await {
                    log::error!("server stopped: {e}");
                }
            });
        });
        Ok(BackgroundServer {
            addr,
            shutdown: Some(tx),
            thread: Some(thread),
        })
    }

    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }
}

impl Drop for BackgroundServer {
    fn drop(&mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}
