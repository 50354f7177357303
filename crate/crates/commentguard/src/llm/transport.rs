//! Request/response channels for remote backends.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TransportError {
    #[error("request timed out")]
    Timeout,
    #[error("connection failed: {0}")]
    Connection(String),
    #[error("rate limited by remote")]
    RateLimited,
    #[error("remote returned status {0}")]
    Status(u16),
    #[error("response is not JSON: {0}")]
    Decode(String),
    #[error("no recorded reply for request {0}")]
    FixtureMiss(String),
}

impl TransportError {
    /// Whether another attempt could succeed.
    pub fn is_transient(&self) -> bool {
        match self {
            TransportError::Timeout
            | TransportError::Connection(_)
            | TransportError::RateLimited => true,
            TransportError::Status(code) => *code >= 500,
            TransportError::Decode(_) | TransportError::FixtureMiss(_) => false,
        }
    }
}

/// A JSON-over-HTTP POST channel. Headers are for credentials and never take
/// part in fixture keys.
pub trait Transport: Send + Sync {
    fn post_json(
        &self,
        url: &str,
        headers: &[(String, String)],
        body: &Value,
        timeout: Duration,
    ) -> Result<Value, TransportError>;
}

/// Stable key of a request: SHA-256 over the URL and the canonical body.
pub fn request_hash(url: &str, body: &Value) -> String {
    let mut h = Sha256::new();
    h.update(url.as_bytes());
    h.update(b"\n");
    // serde_json maps are ordered by key, so this serialization is canonical
    h.update(body.to_string().as_bytes());
    hex::encode(h.finalize())
}

/// Live HTTP transport.
pub struct HttpTransport {
    client: reqwest::blocking::Client,
}

impl HttpTransport {
    pub fn new() -> Result<Self, TransportError> {
        let client = reqwest::blocking::Client::builder()
            .build()
            .map_err(|e| TransportError::Connection(e.to_string()))?;
        Ok(HttpTransport { client })
    }
}

impl Transport for HttpTransport {
    fn post_json(
        &self,
        url: &str,
        headers: &[(String, String)],
        body: &Value,
        timeout: Duration,
    ) -> Result<Value, TransportError> {
        let mut req = self.client.post(url).timeout(timeout).json(body);
        for (k, v) in headers {
            req = req.header(k, v);
        }
        let resp = req.send().map_err(|e| {
            if e.is_timeout() {
                TransportError::Timeout
            } else {
                TransportError::Connection(e.to_string())
            }
        })?;
        let status = resp.status();
        if status.as_u16() == 429 {
            return Err(TransportError::RateLimited);
        }
        if !status.is_success() {
            return Err(TransportError::Status(status.as_u16()));
        }
        resp.json::<Value>()
            .map_err(|e| TransportError::Decode(e.to_string()))
    }
}

/// One fixture line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureEntry {
    pub request_hash: String,
    pub response: Value,
}

/// Answers from a fixture file of recorded responses; never touches the network.
pub struct ReplayTransport {
    entries: Mutex<HashMap<String, Value>>,
}

impl ReplayTransport {
    pub fn from_entries(entries: impl IntoIterator<Item = FixtureEntry>) -> Self {
        let map = entries
            .into_iter()
            .map(|e| (e.request_hash, e.response))
            .collect();
        ReplayTransport {
            entries: Mutex::new(map),
        }
    }

    pub fn open(path: &Path) -> io::Result<Self> {
        let mut entries = Vec::new();
        for line in BufReader::new(File::open(path)?).lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let entry: FixtureEntry = serde_json::from_str(&line)
                .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))?;
            entries.push(entry);
        }
        Ok(Self::from_entries(entries))
    }

    pub fn len(&self) -> usize {
        self.entries.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl Transport for ReplayTransport {
    fn post_json(
        &self,
        url: &str,
        _: &[(String, String)],
        body: &Value,
        _: Duration,
    ) -> Result<Value, TransportError> {
        let key = request_hash(url, body);
        self.entries
            .lock()
            .unwrap()
            .get(&key)
            .cloned()
            .ok_or(TransportError::FixtureMiss(key))
    }
}

/// Wraps another transport and appends every successful exchange to a fixture file.
pub struct RecordingTransport<T> {
    inner: T,
    sink: Mutex<File>,
}

impl<T: Transport> RecordingTransport<T> {
    pub fn new(inner: T, fixture: &Path) -> io::Result<Self> {
        let sink = OpenOptions::new().create(true).append(true).open(fixture)?;
        Ok(RecordingTransport {
            inner,
            sink: Mutex::new(sink),
        })
    }
}

impl<T: Transport> Transport for RecordingTransport<T> {
    fn post_json(
        &self,
        url: &str,
        headers: &[(String, String)],
        body: &Value,
        timeout: Duration,
    ) -> Result<Value, TransportError> {
        let response = self.inner.post_json(url, headers, body, timeout)?;
        let entry = FixtureEntry {
            request_hash: request_hash(url, body),
            response: response.clone(),
        };
        let line = serde_json::to_string(&entry).expect("fixture entry serializes");
        let mut sink = self.sink.lock().unwrap();
        writeln!(sink, "{line}").map_err(|e| TransportError::Connection(e.to_string()))?;
        Ok(response)
    }
}

type Script = dyn Fn(&str, &Value) -> Result<Value, TransportError> + Send + Sync;

/// Programmable transport for tests; counts calls.
pub struct ScriptedTransport {
    script: Box<Script>,
    calls: AtomicUsize,
}

impl ScriptedTransport {
    pub fn new(
        f: impl Fn(&str, &Value) -> Result<Value, TransportError> + Send + Sync + 'static,
    ) -> Self {
        ScriptedTransport {
            script: Box::new(f),
            calls: AtomicUsize::new(0),
        }
    }

    /// Chat endpoint stub answering every prompt via `reply(user_message)`.
    pub fn chat(reply: impl Fn(&str) -> String + Send + Sync + 'static) -> Self {
        Self::new(move |_, body| {
            let user = body["messages"][1]["content"].as_str().unwrap_or_default();
            Ok(chat_response(&reply(user)))
        })
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

impl Transport for ScriptedTransport {
    fn post_json(
        &self,
        url: &str,
        _: &[(String, String)],
        body: &Value,
        _: Duration,
    ) -> Result<Value, TransportError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        (self.script)(url, body)
    }
}

/// Minimal chat-completion response body carrying `content`.
pub fn chat_response(content: &str) -> Value {
    serde_json::json!({
        "object": "chat.completion",
        "choices": [{ "index": 0, "message": { "role": "assistant", "content": content }, "finish_reason": "stop" }]
    })
}

impl<T: Transport + ?Sized> Transport for std::sync::Arc<T> {
    fn post_json(
        &self,
        url: &str,
        headers: &[(String, String)],
        body: &Value,
        timeout: Duration,
    ) -> Result<Value, TransportError> {
        (**self).post_json(url, headers, body, timeout)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_ignores_key_order() {
        let a: Value = serde_json::from_str(r#"{"b":1,"a":[1,2]}"#).unwrap();
        let b: Value = serde_json::from_str(r#"{"a":[1,2],"b":1}"#).unwrap();
        assert_eq!(request_hash("u", &a), request_hash("u", &b));
        assert_ne!(request_hash("u", &a), request_hash("v", &a));
    }

    #[test]
    fn record_then_replay() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("fx.jsonl");
        let body = serde_json::json!({"x": 1});
        let rec =
            RecordingTransport::new(ScriptedTransport::chat(|_| "spam".into()), &path).unwrap();
        let live = rec
            .post_json("u", &[], &body, Duration::from_secs(1))
            .unwrap();
        let replay = ReplayTransport::open(&path).unwrap();
        assert_eq!(replay.len(), 1);
        assert_eq!(
            replay.post_json("u", &[], &body, Duration::ZERO).unwrap(),
            live
        );
        let miss = replay.post_json("u", &[], &serde_json::json!({"x": 2}), Duration::ZERO);
        assert!(matches!(miss, Err(TransportError::FixtureMiss(_))));
    }
}
