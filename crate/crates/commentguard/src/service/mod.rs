//! HTTP classification service.
//!
//! The model is shared immutable state installed once loading finishes;
//! until then every model-dependent route answers 503. Comment text is never
//! stored except through explicit reports.

use std::net::SocketAddr;
use std::path::Path;
use std::sync::{Arc, OnceLock};
use std::time::Instant;

use axum::body::Bytes;
use axum::extract::{ConnectInfo, Request, State};
use axum::http::{HeaderValue, Method, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use commentguard_core::classifiers::Prediction;
use commentguard_core::BinaryLabel;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use tokio::net::TcpListener;
use tower_http::cors::{AllowOrigin, CorsLayer};

use crate::backend::{Backend, BackendError, ModelBackend};
use crate::model_io::load_model_file;

pub mod config;
pub mod ratelimit;
pub mod reports;

pub use config::{ConfigError, RateLimitConfig, ServiceConfig};
pub use ratelimit::RateLimiter;
pub use reports::{read_reports, ReportRecord, ReportStore};

pub const MAX_COMMENT_CHARS: usize = 10_000;
pub const MAX_BATCH: usize = 200;

pub struct AppState {
    backend: OnceLock<Arc<dyn Backend>>,
    reports: ReportStore,
    limiter: Option<RateLimiter>,
    started: Instant,
}

impl AppState {
    pub fn new(reports: ReportStore, limiter: Option<RateLimiter>) -> Self {
        AppState {
            backend: OnceLock::new(),
            reports,
            limiter,
            started: Instant::now(),
        }
    }

    /// Makes the service ready. Only the first call has an effect.
    pub fn install(&self, backend: Arc<dyn Backend>) -> bool {
        self.backend.set(backend).is_ok()
    }

    pub fn backend(&self) -> Option<&Arc<dyn Backend>> {
        self.backend.get()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationResponse {
    pub label: BinaryLabel,
    pub score: f64,
    pub model: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HealthResponse {
    pub status: String,
    pub model: String,
    pub kind: String,
    pub uptime_s: u64,
}

fn error(status: StatusCode, message: impl Into<String>) -> Response {
    (status, Json(serde_json::json!({ "error": message.into() }))).into_response()
}

fn not_ready() -> Response {
    error(StatusCode::SERVICE_UNAVAILABLE, "model not loaded")
}

fn parse_object(body: &[u8]) -> Result<serde_json::Map<String, Value>, Box<Response>> {
    match serde_json::from_slice::<Value>(body) {
        Ok(Value::Object(map)) => Ok(map),
        Ok(_) => Err(Box::new(error(
            StatusCode::BAD_REQUEST,
            "body must be a JSON object",
        ))),
        Err(e) => Err(Box::new(error(
            StatusCode::BAD_REQUEST,
            format!("malformed JSON: {e}"),
        ))),
    }
}

/// Bounds check on a comment: 1..=10,000 characters after trimming.
pub fn check_comment(comment: &str) -> Result<(), &'static str> {
    let n = comment.trim().chars().count();
    if n == 0 {
        Err("comment is empty")
    } else if n > MAX_COMMENT_CHARS {
        Err("comment exceeds 10000 characters")
    } else {
        Ok(())
    }
}

fn response_for(backend: &dyn Backend, p: Prediction) -> ClassificationResponse {
    ClassificationResponse {
        label: p.label,
        score: p.score,
        model: backend.id().to_string(),
    }
}

fn backend_error(e: &BackendError) -> Response {
    if e.is_input_error() {
        error(StatusCode::UNPROCESSABLE_ENTITY, e.to_string())
    } else {
        tracing::warn!(error = %e, "backend failure");
        error(StatusCode::SERVICE_UNAVAILABLE, "model backend unavailable")
    }
}

async fn classify(State(state): State<Arc<AppState>>, body: Bytes) -> Response {
    let mut map = match parse_object(&body) {
        Ok(m) => m,
        Err(r) => return *r,
    };
    let Some(Value::String(comment)) = map.remove("comment") else {
        return error(StatusCode::BAD_REQUEST, "field `comment` must be a string");
    };
    if let Err(msg) = check_comment(&comment) {
        return error(StatusCode::UNPROCESSABLE_ENTITY, msg);
    }
    let Some(backend) = state.backend().cloned() else {
        return not_ready();
    };
    let result = tokio::task::spawn_blocking(move || {
        backend
            .classify(&comment)
            .map(|p| response_for(backend.as_ref(), p))
    })
    .await;
    match result {
        Ok(Ok(resp)) => Json(resp).into_response(),
        Ok(Err(e)) => backend_error(&e),
        Err(_) => error(
            StatusCode::INTERNAL_SERVER_ERROR,
            "classification task failed",
        ),
    }
}

/// One slot of a batch response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BatchItem {
    Ok(ClassificationResponse),
    Err { error: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchResponse {
    pub results: Vec<BatchItem>,
}

async fn classify_batch(State(state): State<Arc<AppState>>, body: Bytes) -> Response {
    let mut map = match parse_object(&body) {
        Ok(m) => m,
        Err(r) => return *r,
    };
    let Some(Value::Array(comments)) = map.remove("comments") else {
        return error(StatusCode::BAD_REQUEST, "field `comments` must be an array");
    };
    if comments.is_empty() || comments.len() > MAX_BATCH {
        return error(
            StatusCode::UNPROCESSABLE_ENTITY,
            format!("batch must hold 1..={MAX_BATCH} comments"),
        );
    }
    let Some(backend) = state.backend().cloned() else {
        return not_ready();
    };
    let result = tokio::task::spawn_blocking(move || {
        comments
            .iter()
            .map(|c| {
                let Value::String(text) = c else {
                    return BatchItem::Err {
                        error: "comment must be a string".into(),
                    };
                };
                if let Err(msg) = check_comment(text) {
                    return BatchItem::Err { error: msg.into() };
                }
                match backend.classify(text) {
                    Ok(p) => BatchItem::Ok(response_for(backend.as_ref(), p)),
                    Err(e) => BatchItem::Err {
                        error: e.to_string(),
                    },
                }
            })
            .collect::<Vec<_>>()
    })
    .await;
    match result {
        Ok(results) => Json(BatchResponse { results }).into_response(),
        Err(_) => error(
            StatusCode::INTERNAL_SERVER_ERROR,
            "classification task failed",
        ),
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ReportRequest {
    comment: String,
    predicted: BinaryLabel,
    reported: BinaryLabel,
    #[serde(default)]
    client_ts: Option<String>,
}

async fn report(State(state): State<Arc<AppState>>, body: Bytes) -> Response {
    let req: ReportRequest = match serde_json::from_slice(&body) {
        Ok(r) => r,
        Err(e) => return error(StatusCode::BAD_REQUEST, format!("malformed report: {e}")),
    };
    if let Err(msg) = check_comment(&req.comment) {
        return error(StatusCode::UNPROCESSABLE_ENTITY, msg);
    }
    if req.predicted == req.reported {
        return error(
            StatusCode::UNPROCESSABLE_ENTITY,
            "a report must disagree with the prediction",
        );
    }
    let Some(backend) = state.backend() else {
        return not_ready();
    };
    let record = ReportRecord {
        comment: req.comment,
        predicted: req.predicted,
        reported: req.reported,
        client_ts: req.client_ts,
        server_ts: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true),
        model: backend.id().to_string(),
    };
    let st = state.clone();
    match tokio::task::spawn_blocking(move || st.reports.append(&record)).await {
        Ok(Ok(())) => (
            StatusCode::ACCEPTED,
            Json(serde_json::json!({ "accepted": true })),
        )
            .into_response(),
        Ok(Err(e)) => {
            tracing::error!(error = %e, "report store write failed");
            error(
                StatusCode::INTERNAL_SERVER_ERROR,
                "report could not be stored",
            )
        }
        Err(_) => error(StatusCode::INTERNAL_SERVER_ERROR, "report task failed"),
    }
}

async fn health(State(state): State<Arc<AppState>>) -> Response {
    let Some(backend) = state.backend() else {
        return (
            StatusCode::SERVICE_UNAVAILABLE,
            Json(serde_json::json!({ "status": "loading" })),
        )
            .into_response();
    };
    Json(HealthResponse {
        status: "ok".into(),
        model: backend.id().into(),
        kind: backend.kind().into(),
        uptime_s: state.started.elapsed().as_secs(),
    })
    .into_response()
}

async fn rate_limit(State(state): State<Arc<AppState>>, req: Request, next: Next) -> Response {
    if let Some(limiter) = &state.limiter {
        let client = req
            .extensions()
            .get::<ConnectInfo<SocketAddr>>()
            .map(|c| c.0.ip());
        if let Some(ip) = client {
            if !limiter.check(ip) {
                return error(StatusCode::TOO_MANY_REQUESTS, "rate limit exceeded");
            }
        }
    }
    next.run(req).await
}

/// Whether `origin` is admitted by the allow-list.
pub fn origin_allowed(allow: &[String], origin: &str) -> bool {
    allow.iter().any(|a| match a.strip_suffix('*') {
        Some(prefix) => origin.starts_with(prefix),
        None => a == origin,
    })
}

fn cors(allow: Vec<String>) -> CorsLayer {
    CorsLayer::new()
        .allow_methods([Method::GET, Method::POST])
        .allow_headers([axum::http::header::CONTENT_TYPE])
        .allow_origin(AllowOrigin::predicate(move |origin: &HeaderValue, _| {
            origin.to_str().is_ok_and(|o| origin_allowed(&allow, o))
        }))
}

pub fn router(state: Arc<AppState>, cors_origins: Vec<String>) -> Router {
    Router::new()
        .route("/scam", post(classify))
        .route("/scam/batch", post(classify_batch))
        .route("/report", post(report))
        .route("/health", get(health))
        .layer(middleware::from_fn_with_state(state.clone(), rate_limit))
        .layer(cors(cors_origins))
        .with_state(state)
}

/// State built from a config; the backend is installed separately.
pub fn state_from_config(cfg: &ServiceConfig) -> std::io::Result<Arc<AppState>> {
    let reports = ReportStore::open(&cfg.report_store)?;
    let limiter = cfg
        .rate_limited()
        .then(|| RateLimiter::new(cfg.rate_limit.per_second, cfg.rate_limit.burst));
    Ok(Arc::new(AppState::new(reports, limiter)))
}

/// Serves `state` on `listener` until `shutdown` resolves.
pub async fn serve_on(
    listener: TcpListener,
    state: Arc<AppState>,
    cors_origins: Vec<String>,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    let app = router(state, cors_origins).into_make_service_with_connect_info::<SocketAddr>();
    axum::serve(listener, app)
        .with_graceful_shutdown(shutdown)
        .await
}

/// Backend identifier: the configured id, else the model file stem.
pub fn model_id(cfg: &ServiceConfig, model_path: &Path) -> String {
    cfg.model_id.clone().unwrap_or_else(|| {
        model_path
            .file_stem()
            .map_or_else(|| "model".into(), |s| s.to_string_lossy().into_owned())
    })
}

#[derive(Debug, thiserror::Error)]
pub enum ServeError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("no model file configured")]
    NoModel,
    #[error("model load failed: {0}")]
    Load(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Binds, starts answering (503 until ready), loads the model, and serves
/// until ctrl-c. A load failure stops the server and is returned.
pub async fn run(cfg: ServiceConfig) -> Result<(), ServeError> {
    cfg.validate()?;
    let model_path = cfg.model.clone().ok_or(ServeError::NoModel)?;
    let state = state_from_config(&cfg)?;
    let listener = TcpListener::bind(cfg.addr()).await?;
    tracing::info!(addr = %listener.local_addr()?, "listening");

    let (stop_tx, stop_rx) = tokio::sync::oneshot::channel::<()>();
    let shutdown = async move {
        tokio::select! {
            _ = tokio::signal::ctrl_c() => {}
            _ = stop_rx => {}
        }
    };
    let server = tokio::spawn(serve_on(
        listener,
        state.clone(),
        cfg.cors_origins.clone(),
        shutdown,
    ));

    let id = model_id(&cfg, &model_path);
    let loaded = tokio::task::spawn_blocking(move || -> Result<ModelBackend, String> {
        let model = load_model_file(&model_path).map_err(|e| e.to_string())?;
        ModelBackend::new(id, model).map_err(|e| e.to_string())
    })
    .await
    .map_err(|e| ServeError::Load(e.to_string()))?;
    match loaded {
        Ok(backend) => {
            tracing::info!(model = backend.id(), kind = backend.kind(), "model loaded");
            state.install(Arc::new(backend));
        }
        Err(e) => {
            let _ = stop_tx.send(());
            let _ = server.await;
            return Err(ServeError::Load(e));
        }
    }
    server
        .await
        .map_err(|e| ServeError::Load(e.to_string()))??;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn comment_bounds() {
        assert!(check_comment("  ").is_err());
        assert!(check_comment(&"a".repeat(10_000)).is_ok());
        assert!(check_comment(&format!("  {}  ", "a".repeat(10_000))).is_ok());
        assert!(check_comment(&"a".repeat(10_001)).is_err());
    }

    #[test]
    fn origin_matching() {
        let allow = vec![
            "https://www.instagram.com".to_string(),
            "chrome-extension://*".to_string(),
        ];
        assert!(origin_allowed(&allow, "https://www.instagram.com"));
        assert!(origin_allowed(&allow, "chrome-extension://abcdef"));
        assert!(!origin_allowed(&allow, "https://evil.example"));
    }
}
