//! Zero-shot chat-completion protocol: prompt construction and reply parsing.
//! Transports and retries live in the `commentguard` crate.

use alloc::string::String;

use serde::{Deserialize, Serialize};

use crate::corpus::RawLabel;

pub const COMMENT_PLACEHOLDER: &str = "{comment}";

pub const DEFAULT_SYSTEM_PROMPT: &str =
    "You are a comment moderator at Instagram classifying comments.";

pub const DEFAULT_USER_TEMPLATE: &str = "Classify the following Instagram comment as 'spam', 'scam', or 'genuine'. Reply only with the label for this comment: '{comment}'";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LlmConfig {
    pub model_name: String,
    pub max_tokens: u32,
    pub temperature: f64,
    pub seed: u64,
    pub system_prompt: String,
    pub user_template: String,
    pub api_url: String,
    /// Name of the environment variable holding the API key.
    pub api_key_env: String,
    pub timeout_ms: u64,
    pub retries: u32,
    /// Base delay of the exponential backoff between attempts.
    pub backoff_ms: u64,
}

impl Default for LlmConfig {
    fn default() -> Self {
        LlmConfig {
            model_name: "gpt-4-1106-preview".into(),
            max_tokens: 10,
            temperature: 0.0,
            seed: 42,
            system_prompt: DEFAULT_SYSTEM_PROMPT.into(),
            user_template: DEFAULT_USER_TEMPLATE.into(),
            api_url: "https://api.openai.com/v1/chat/completions".into(),
            api_key_env: "OPENAI_API_KEY".into(),
            timeout_ms: 30_000,
            retries: 2,
            backoff_ms: 500,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PromptError {
    #[error("comment is empty")]
    EmptyComment,
    #[error("user template must contain `{{comment}}` exactly once")]
    BadTemplate,
}

impl LlmConfig {
    pub fn validate(&self) -> Result<(), PromptError> {
        if self.user_template.matches(COMMENT_PLACEHOLDER).count() != 1 {
            return Err(PromptError::BadTemplate);
        }
        Ok(())
    }
}

/// System and user messages for one comment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prompt {
    pub system: String,
    pub user: String,
}

/// Substitutes the comment into the user template verbatim.
pub fn build_prompt(comment: &str, cfg: &LlmConfig) -> Result<Prompt, PromptError> {
    if comment.trim().is_empty() {
        return Err(PromptError::EmptyComment);
    }
    cfg.validate()?;
    Ok(Prompt {
        system: cfg.system_prompt.clone(),
        user: cfg.user_template.replacen(COMMENT_PLACEHOLDER, comment, 1),
    })
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("reply does not name a label: `{normalized}`")]
pub struct UnmappableReply {
    pub normalized: String,
}

fn is_trim_char(c: char) -> bool {
    c.is_ascii_punctuation() || matches!(c, '\u{2018}' | '\u{2019}' | '\u{201C}' | '\u{201D}')
}

/// Trim, lowercase, drop terminal punctuation, keep the first word.
/// Quote characters wrapping the word are dropped as well.
pub fn normalize_reply(reply: &str) -> String {
    let lowered = reply.trim().to_lowercase();
    let stripped = lowered.trim_end_matches(is_trim_char);
    let first = stripped.split_whitespace().next().unwrap_or("");
    first.trim_matches(is_trim_char).into()
}

pub fn parse_reply(reply: &str) -> Result<RawLabel, UnmappableReply> {
    let normalized = normalize_reply(reply);
    normalized
        .parse()
        .map_err(|_| UnmappableReply { normalized })
}

/// Remote inference service speaking the `/scam` wire contract.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EndpointConfig {
    pub url: String,
    pub timeout_ms: u64,
    pub retries: u32,
    pub backoff_ms: u64,
}

impl Default for EndpointConfig {
    fn default() -> Self {
        EndpointConfig {
            url: "http://127.0.0.1:8080/scam".into(),
            timeout_ms: 10_000,
            retries: 2,
            backoff_ms: 200,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_protocol() {
        let cfg = LlmConfig::default();
        assert_eq!(cfg.max_tokens, 10);
        assert_eq!(cfg.seed, 42);
        assert_eq!(cfg.temperature, 0.0);
        assert!(cfg.validate().is_ok());
    }

    #[test]
    fn prompt_substitutes_verbatim() {
        let cfg = LlmConfig::default();
        let p = build_prompt("free money", &cfg).unwrap();
        assert_eq!(p.system, DEFAULT_SYSTEM_PROMPT);
        assert!(p
            .user
            .ends_with("Reply only with the label for this comment: 'free money'"));
        let p = build_prompt("don't {comment} me", &cfg).unwrap();
        assert!(p.user.ends_with("'don't {comment} me'"));
        assert_eq!(build_prompt("  ", &cfg), Err(PromptError::EmptyComment));
    }

    #[test]
    fn template_needs_one_placeholder() {
        let cfg = LlmConfig {
            user_template: "no slot".into(),
            ..LlmConfig::default()
        };
        assert_eq!(build_prompt("x", &cfg), Err(PromptError::BadTemplate));
    }

    #[test]
    fn reply_normalization() {
        assert_eq!(parse_reply("Spam."), Ok(RawLabel::Spam));
        assert_eq!(parse_reply("genuine"), Ok(RawLabel::Genuine));
        assert_eq!(parse_reply("  SCAM\n"), Ok(RawLabel::Scam));
        assert_eq!(parse_reply("'scam'"), Ok(RawLabel::Scam));
        assert!(parse_reply("I cannot classify this").is_err());
        assert!(parse_reply("").is_err());
    }
}
