use std::path::Path;
use std::sync::Arc;

use commentguard::backend::{Backend, BackendError, ModelBackend, StubBackend};
use commentguard::llm::{ScriptedTransport, TransportError};
use commentguard::service::{self, read_reports, AppState, RateLimiter, ReportStore};
use commentguard_core::classifiers::{
    ClassifierModel, ModelKind, Prediction, RemoteSpec, TrainConfig,
};
use commentguard_core::llm::LlmConfig;
use commentguard_core::BinaryLabel;
use reqwest::StatusCode;
use serde_json::{json, Value};
use tokio::net::TcpListener;
use tokio::sync::oneshot;
use tokio::task::JoinHandle;

struct Server {
    base: String,
    state: Arc<AppState>,
    stop: Option<oneshot::Sender<()>>,
    handle: JoinHandle<std::io::Result<()>>,
}

impl Server {
    async fn start(reports: &Path, limiter: Option<RateLimiter>) -> Server {
        let state = Arc::new(AppState::new(ReportStore::open(reports).unwrap(), limiter));
        let listener = TcpListener::bind("127.0.0.1:0").await.unwrap();
        let base = format!("http://{}", listener.local_addr().unwrap());
        let (tx, rx) = oneshot::channel::<()>();
        let origins = vec!["chrome-extension://*".to_string()];
        let handle = tokio::spawn(service::serve_on(listener, state.clone(), origins, async {
            let _ = rx.await;
        }));
        Server {
            base,
            state,
            stop: Some(tx),
            handle,
        }
    }

    async fn with_backend(reports: &Path, backend: impl Backend + 'static) -> Server {
        let s = Server::start(reports, None).await;
        assert!(s.state.install(Arc::new(backend)));
        s
    }

    fn url(&self, path: &str) -> String {
        format!("{}{path}", self.base)
    }

    async fn stop(mut self) {
        let _ = self.stop.take().unwrap().send(());
        self.handle.await.unwrap().unwrap();
    }
}

fn client() -> &'static reqwest::Client {
    static CLIENT: std::sync::OnceLock<reqwest::Client> = std::sync::OnceLock::new();
    CLIENT.get_or_init(|| {
        reqwest::Client::builder()
            .pool_max_idle_per_host(0)
            .build()
            .unwrap()
    })
}

async fn post(url: &str, body: &str) -> (StatusCode, String) {
    let resp = client()
        .post(url)
        .header("content-type", "application/json")
        .body(body.to_string())
        .send()
        .await
        .unwrap();
    let status = resp.status();
    (status, resp.text().await.unwrap())
}

fn stub() -> StubBackend {
    StubBackend::new("stub", BinaryLabel::Fraud, 0.99)
}

/// Flags comments mentioning money; echoes nothing else.
struct Keyword;

impl Backend for Keyword {
    fn id(&self) -> &str {
        "keyword"
    }
    fn kind(&self) -> &str {
        "stub"
    }
    fn classify(&self, text: &str) -> Result<Prediction, BackendError> {
        let fraud = text.contains('$') || text.contains("crypto");
        Ok(Prediction::hard(if fraud {
            BinaryLabel::Fraud
        } else {
            BinaryLabel::Genuine
        }))
    }
    fn deterministic(&self) -> bool {
        true
    }
}

fn nb_model() -> ClassifierModel {
    let corpus = [
        ("free crypto now dm me", BinaryLabel::Fraud),
        ("invest now and earn $500 dm me", BinaryLabel::Fraud),
        ("crypto signals dm me now", BinaryLabel::Fraud),
        ("love this photo so much", BinaryLabel::Genuine),
        ("great photo love the colors", BinaryLabel::Genuine),
        ("so much love for this", BinaryLabel::Genuine),
    ];
    ClassifierModel::train(ModelKind::NaiveBayes, &corpus, &TrainConfig::default()).unwrap()
}

#[tokio::test(flavor = "multi_thread")]
async fn classify_golden() {
    let dir = tempfile::tempdir().unwrap();
    let s = Server::with_backend(&dir.path().join("r.jsonl"), stub()).await;
    let (status, body) = post(&s.url("/scam"), r#"{"comment":"x"}"#).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body, r#"{"label":"fraud","score":0.99,"model":"stub"}"#);

    assert_eq!(post(&s.url("/scam"), "{}").await.0, StatusCode::BAD_REQUEST);
    assert_eq!(
        post(&s.url("/scam"), "not json").await.0,
        StatusCode::BAD_REQUEST
    );
    assert_eq!(
        post(&s.url("/scam"), r#"{"comment":5}"#).await.0,
        StatusCode::BAD_REQUEST
    );
    assert_eq!(
        post(&s.url("/scam"), r#"[1]"#).await.0,
        StatusCode::BAD_REQUEST
    );
    assert_eq!(
        post(&s.url("/scam"), r#"{"comment":"   "}"#).await.0,
        StatusCode::UNPROCESSABLE_ENTITY
    );
    let long = json!({ "comment": "a".repeat(10_001) }).to_string();
    assert_eq!(
        post(&s.url("/scam"), &long).await.0,
        StatusCode::UNPROCESSABLE_ENTITY
    );
    let max = json!({ "comment": "a".repeat(10_000) }).to_string();
    assert_eq!(post(&s.url("/scam"), &max).await.0, StatusCode::OK);
    s.stop().await;
}

#[tokio::test(flavor = "multi_thread")]
async fn batch_preserves_order_and_isolates_failures() {
    let dir = tempfile::tempdir().unwrap();
    let s = Server::with_backend(&dir.path().join("r.jsonl"), Keyword).await;
    let (status, body) = post(
        &s.url("/scam/batch"),
        r#"{"comments":["nice","free crypto","win $5"]}"#,
    )
    .await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(
        body,
        r#"{"results":[{"label":"genuine","score":0.0,"model":"keyword"},{"label":"fraud","score":1.0,"model":"keyword"},{"label":"fraud","score":1.0,"model":"keyword"}]}"#
    );

    let (status, body) = post(
        &s.url("/scam/batch"),
        r#"{"comments":["nice","","crypto"]}"#,
    )
    .await;
    assert_eq!(status, StatusCode::OK);
    let v: Value = serde_json::from_str(&body).unwrap();
    let results = v["results"].as_array().unwrap();
    assert_eq!(results.len(), 3);
    assert_eq!(results[0]["label"], "genuine");
    assert!(results[1]["error"].is_string());
    assert!(results[1].get("label").is_none());
    assert_eq!(results[2]["label"], "fraud");

    assert_eq!(
        post(&s.url("/scam/batch"), r#"{"comments":[]}"#).await.0,
        StatusCode::UNPROCESSABLE_ENTITY
    );
    let too_many = json!({ "comments": vec!["x"; 201] }).to_string();
    assert_eq!(
        post(&s.url("/scam/batch"), &too_many).await.0,
        StatusCode::UNPROCESSABLE_ENTITY
    );
    let full = json!({ "comments": vec!["x"; 200] }).to_string();
    assert_eq!(post(&s.url("/scam/batch"), &full).await.0, StatusCode::OK);
    assert_eq!(
        post(&s.url("/scam/batch"), r#"{"comments":"x"}"#).await.0,
        StatusCode::BAD_REQUEST
    );
    s.stop().await;
}

#[tokio::test(flavor = "multi_thread")]
async fn reports_are_durable_across_restart() {
    let dir = tempfile::tempdir().unwrap();
    let store = dir.path().join("reports.jsonl");
    let s = Server::with_backend(&store, stub()).await;
    let (status, body) = post(
        &s.url("/report"),
        r#"{"comment":"gm","predicted":"fraud","reported":"genuine"}"#,
    )
    .await;
    assert_eq!(status, StatusCode::ACCEPTED);
    assert_eq!(body, r#"{"accepted":true}"#);
    // acknowledged means already on disk
    assert_eq!(read_reports(&store).unwrap().len(), 1);

    let same = r#"{"comment":"gm","predicted":"fraud","reported":"fraud"}"#;
    assert_eq!(
        post(&s.url("/report"), same).await.0,
        StatusCode::UNPROCESSABLE_ENTITY
    );
    let bad_label = r#"{"comment":"gm","predicted":"maybe","reported":"fraud"}"#;
    assert_eq!(
        post(&s.url("/report"), bad_label).await.0,
        StatusCode::BAD_REQUEST
    );
    assert_eq!(
        post(&s.url("/report"), "{}").await.0,
        StatusCode::BAD_REQUEST
    );

    let report_url = s.url("/report");
    let a = post(
        &report_url,
        r#"{"comment":"one","predicted":"genuine","reported":"fraud"}"#,
    );
    let b = post(
        &report_url,
        r#"{"comment":"two","predicted":"fraud","reported":"genuine","client_ts":"2024-01-01T00:00:00Z"}"#,
    );
    let (ra, rb) = tokio::join!(a, b);
    assert_eq!((ra.0, rb.0), (StatusCode::ACCEPTED, StatusCode::ACCEPTED));
    assert_eq!(read_reports(&store).unwrap().len(), 3);
    s.stop().await;

    let s = Server::with_backend(&store, stub()).await;
    let (status, _) = post(
        &s.url("/report"),
        r#"{"comment":"after","predicted":"fraud","reported":"genuine"}"#,
    )
    .await;
    assert_eq!(status, StatusCode::ACCEPTED);
    s.stop().await;

    let records = read_reports(&store).unwrap();
    assert_eq!(records.len(), 4);
    assert_eq!(records[0].comment, "gm");
    assert_eq!(records[0].predicted, BinaryLabel::Fraud);
    assert_eq!(records[0].model, "stub");
    assert_eq!(records[3].comment, "after");
    let two = records.iter().find(|r| r.comment == "two").unwrap();
    assert_eq!(two.client_ts.as_deref(), Some("2024-01-01T00:00:00Z"));
}

#[tokio::test(flavor = "multi_thread")]
async fn health_reflects_loading() {
    let dir = tempfile::tempdir().unwrap();
    let s = Server::start(&dir.path().join("r.jsonl"), None).await;
    let health = reqwest::get(s.url("/health")).await.unwrap();
    assert_eq!(health.status(), StatusCode::SERVICE_UNAVAILABLE);
    assert_eq!(
        post(&s.url("/scam"), r#"{"comment":"x"}"#).await.0,
        StatusCode::SERVICE_UNAVAILABLE
    );

    s.state
        .install(Arc::new(ModelBackend::new("nb-v1", nb_model()).unwrap()));
    let health = reqwest::get(s.url("/health")).await.unwrap();
    assert_eq!(health.status(), StatusCode::OK);
    let v: Value = health.json().await.unwrap();
    assert_eq!(v["status"], "ok");
    assert_eq!(v["model"], "nb-v1");
    assert_eq!(v["kind"], "naive_bayes");
    assert!(v["uptime_s"].is_u64());
    s.stop().await;
}

#[tokio::test(flavor = "multi_thread")]
async fn concurrent_classification_matches_sequential() {
    let dir = tempfile::tempdir().unwrap();
    let model = nb_model();
    let s = Server::with_backend(
        &dir.path().join("r.jsonl"),
        ModelBackend::new("nb-v1", model.clone()).unwrap(),
    )
    .await;
    let words = [
        "free", "crypto", "love", "photo", "dm", "me", "now", "colors", "earn", "$500",
    ];
    let comments: Vec<String> = (0..64)
        .map(|i| {
            format!(
                "{} {} {}",
                words[i % 10],
                words[(i / 10) % 10],
                words[(i * 7) % 10]
            )
        })
        .collect();

    let mut sequential = Vec::new();
    for c in &comments {
        sequential.push(post(&s.url("/scam"), &json!({ "comment": c }).to_string()).await);
    }
    let mut set = tokio::task::JoinSet::new();
    for (i, c) in comments.iter().enumerate() {
        let url = s.url("/scam");
        let body = json!({ "comment": c }).to_string();
        set.spawn(async move { (i, post(&url, &body).await) });
    }
    let mut concurrent = vec![None; 64];
    while let Some(r) = set.join_next().await {
        let (i, out) = r.unwrap();
        concurrent[i] = Some(out);
    }
    for (i, c) in comments.iter().enumerate() {
        let (status, body) = concurrent[i].clone().unwrap();
        assert_eq!(status, StatusCode::OK);
        assert_eq!(body, sequential[i].1, "comment {i}");
        let direct = model.predict(c).unwrap();
        let v: Value = serde_json::from_str(&body).unwrap();
        assert_eq!(
            v["score"].as_f64().unwrap().to_bits(),
            direct.score.to_bits()
        );
    }
    s.stop().await;
}

#[tokio::test(flavor = "multi_thread")]
async fn remote_backend_failure_is_503() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = LlmConfig {
        retries: 1,
        backoff_ms: 0,
        ..LlmConfig::default()
    };
    let t = Arc::new(ScriptedTransport::new(|_, _| Err(TransportError::Timeout)));
    let backend = ModelBackend::with_transport(
        "gpt",
        ClassifierModel::remote(RemoteSpec::Chat(cfg)),
        t.clone(),
    );
    let s = Server::with_backend(&dir.path().join("r.jsonl"), backend).await;
    assert_eq!(
        post(&s.url("/scam"), r#"{"comment":"x"}"#).await.0,
        StatusCode::SERVICE_UNAVAILABLE
    );
    assert_eq!(t.calls(), 2);
    s.stop().await;
}

#[tokio::test(flavor = "multi_thread")]
async fn rate_limit_and_cors() {
    let dir = tempfile::tempdir().unwrap();
    let s = Server::start(
        &dir.path().join("r.jsonl"),
        Some(RateLimiter::new(0.001, 2.0)),
    )
    .await;
    s.state.install(Arc::new(stub()));
    assert_eq!(
        post(&s.url("/scam"), r#"{"comment":"x"}"#).await.0,
        StatusCode::OK
    );
    assert_eq!(
        post(&s.url("/scam"), r#"{"comment":"x"}"#).await.0,
        StatusCode::OK
    );
    assert_eq!(
        post(&s.url("/scam"), r#"{"comment":"x"}"#).await.0,
        StatusCode::TOO_MANY_REQUESTS
    );
    s.stop().await;

    let s = Server::with_backend(&dir.path().join("r2.jsonl"), stub()).await;
    let client = reqwest::Client::new();
    let preflight = |origin: &'static str| {
        client
            .request(reqwest::Method::OPTIONS, s.url("/scam"))
            .header("origin", origin)
            .header("access-control-request-method", "POST")
            .header("access-control-request-headers", "content-type")
            .send()
    };
    let ok = preflight("chrome-extension://abcdef").await.unwrap();
    assert_eq!(
        ok.headers()["access-control-allow-origin"],
        "chrome-extension://abcdef"
    );
    let denied = preflight("https://evil.example").await.unwrap();
    assert!(denied
        .headers()
        .get("access-control-allow-origin")
        .is_none());
    s.stop().await;
}

#[tokio::test(flavor = "multi_thread")]
async fn repeated_requests_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let s = Server::with_backend(
        &dir.path().join("r.jsonl"),
        ModelBackend::new("nb-v1", nb_model()).unwrap(),
    )
    .await;
    let body = r#"{"comment":"free crypto, dm me now!"}"#;
    let first = post(&s.url("/scam"), body).await;
    for _ in 0..5 {
        assert_eq!(post(&s.url("/scam"), body).await, first);
    }
    s.stop().await;
}
