//! Remote classification backends: the zero-shot chat protocol and the
//! inference-endpoint adapter.
//!
//! Comment text is never logged here.

use std::thread;
use std::time::Duration;

use commentguard_core::classifiers::Prediction;
use commentguard_core::llm::{
    build_prompt, parse_reply, EndpointConfig, LlmConfig, PromptError, UnmappableReply,
};
use commentguard_core::{BinaryLabel, RawLabel};
use serde_json::{json, Value};

pub mod transport;

pub use transport::{
    chat_response, request_hash, FixtureEntry, HttpTransport, RecordingTransport, ReplayTransport,
    ScriptedTransport, Transport, TransportError,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LlmError {
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error("remote backend unavailable after {attempts} attempt(s): {last}")]
    RemoteUnavailable { attempts: u32, last: TransportError },
    #[error("remote backend kept rate limiting after {attempts} attempt(s)")]
    RateLimited { attempts: u32 },
    #[error(transparent)]
    UnmappableReply(#[from] UnmappableReply),
    #[error("malformed response: {0}")]
    MalformedResponse(String),
}

/// Runs `send` up to `retries + 1` times with exponential backoff on transient errors.
pub fn with_retries<F>(retries: u32, backoff_ms: u64, mut send: F) -> Result<Value, LlmError>
where
    F: FnMut() -> Result<Value, TransportError>,
{
    let mut attempt = 0;
    loop {
        attempt += 1;
        match send() {
            Ok(v) => return Ok(v),
            Err(e) if e.is_transient() && attempt <= retries => {
                tracing::debug!(attempt, error = %e, "remote call failed, retrying");
                let delay = backoff_ms.saturating_mul(1 << (attempt - 1).min(16));
                if delay > 0 {
                    thread::sleep(Duration::from_millis(delay));
                }
            }
            Err(TransportError::RateLimited) => {
                return Err(LlmError::RateLimited { attempts: attempt })
            }
            Err(last) => {
                return Err(LlmError::RemoteUnavailable {
                    attempts: attempt,
                    last,
                })
            }
        }
    }
}

/// Chat-completion request body for one comment.
pub fn chat_request(comment: &str, cfg: &LlmConfig) -> Result<Value, LlmError> {
    let prompt = build_prompt(comment, cfg)?;
    Ok(json!({
        "model": cfg.model_name,
        "messages": [
            { "role": "system", "content": prompt.system },
            { "role": "user", "content": prompt.user },
        ],
        "max_tokens": cfg.max_tokens,
        "temperature": cfg.temperature,
        "seed": cfg.seed,
    }))
}

fn auth_headers(cfg: &LlmConfig) -> Vec<(String, String)> {
    match std::env::var(&cfg.api_key_env) {
        Ok(key) if !key.is_empty() => vec![("Authorization".into(), format!("Bearer {key}"))],
        _ => Vec::new(),
    }
}

/// Raw three-way verdict from the chat model.
pub fn classify_remote_raw<T: Transport + ?Sized>(
    comment: &str,
    cfg: &LlmConfig,
    transport: &T,
) -> Result<RawLabel, LlmError> {
    let body = chat_request(comment, cfg)?;
    let headers = auth_headers(cfg);
    let timeout = Duration::from_millis(cfg.timeout_ms);
    let response = with_retries(cfg.retries, cfg.backoff_ms, || {
        transport.post_json(&cfg.api_url, &headers, &body, timeout)
    })?;
    let reply = response["choices"][0]["message"]["content"]
        .as_str()
        .ok_or_else(|| LlmError::MalformedResponse("no choices[0].message.content".into()))?;
    Ok(parse_reply(reply)?)
}

/// Hard verdict: score 1.0 for spam or scam, 0.0 for genuine.
pub fn classify_remote<T: Transport + ?Sized>(
    comment: &str,
    cfg: &LlmConfig,
    transport: &T,
) -> Result<Prediction, LlmError> {
    classify_remote_raw(comment, cfg, transport).map(|raw| Prediction::hard(raw.collapse()))
}

/// Forwards a comment to a service speaking the `/scam` contract.
pub fn classify_inference_endpoint<T: Transport + ?Sized>(
    comment: &str,
    cfg: &EndpointConfig,
    transport: &T,
) -> Result<Prediction, LlmError> {
    let body = json!({ "comment": comment });
    let timeout = Duration::from_millis(cfg.timeout_ms);
    let response = with_retries(cfg.retries, cfg.backoff_ms, || {
        transport.post_json(&cfg.url, &[], &body, timeout)
    })?;
    let label = response["label"]
        .as_str()
        .and_then(|l| l.parse::<BinaryLabel>().ok())
        .ok_or_else(|| LlmError::MalformedResponse(format!("bad label in {response}")))?;
    let score = response["score"]
        .as_f64()
        .filter(|s| (0.0..=1.0).contains(s))
        .ok_or_else(|| LlmError::MalformedResponse(format!("bad score in {response}")))?;
    Ok(Prediction { label, score })
}
