//! Service configuration: a TOML file plus `COMMENTGUARD_*` environment overrides.

use std::fs;
use std::net::{IpAddr, Ipv4Addr, SocketAddr};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RateLimitConfig {
    pub enabled: bool,
    /// Sustained requests per second per client address.
    pub per_second: f64,
    /// Bucket capacity.
    pub burst: f64,
}

impl Default for RateLimitConfig {
    fn default() -> Self {
        RateLimitConfig {
            enabled: true,
            per_second: 10.0,
            burst: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    pub host: IpAddr,
    pub port: u16,
    pub model: Option<PathBuf>,
    /// Identifier reported to clients; defaults to the model file stem.
    pub model_id: Option<String>,
    pub report_store: PathBuf,
    pub rate_limit: RateLimitConfig,
    /// Allowed CORS origins. An entry ending in `*` matches by prefix.
    pub cors_origins: Vec<String>,
    /// Disables rate limiting.
    pub test_mode: bool,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            host: IpAddr::V4(Ipv4Addr::LOCALHOST),
            port: 8080,
            model: None,
            model_id: None,
            report_store: PathBuf::from("reports.jsonl"),
            rate_limit: RateLimitConfig::default(),
            cors_origins: vec![
                "https://www.instagram.com".into(),
                "chrome-extension://*".into(),
                "moz-extension://*".into(),
            ],
            test_mode: false,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("invalid config {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("invalid value for {var}: `{value}`")]
    Env { var: &'static str, value: String },
    #[error("{0}")]
    Invalid(&'static str),
}

fn parse_bool(s: &str) -> Option<bool> {
    match s.trim().to_ascii_lowercase().as_str() {
        "1" | "true" | "yes" | "on" => Some(true),
        "0" | "false" | "no" | "off" => Some(false),
        _ => None,
    }
}

impl ServiceConfig {
    pub fn from_toml_str(text: &str, path: &Path) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse {
            path: path.into(),
            message: e.to_string(),
        })
    }

    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.into(),
            source,
        })?;
        Self::from_toml_str(&text, path)
    }

    /// Applies overrides read through `lookup` (normally `std::env::var`).
    pub fn apply_env<F>(&mut self, lookup: F) -> Result<(), ConfigError>
    where
        F: Fn(&str) -> Option<String>,
    {
        fn parsed<T: std::str::FromStr>(var: &'static str, v: String) -> Result<T, ConfigError> {
            v.trim()
                .parse()
                .map_err(|_| ConfigError::Env { var, value: v })
        }
        if let Some(v) = lookup("COMMENTGUARD_HOST") {
            self.host = parsed("COMMENTGUARD_HOST", v)?;
        }
        if let Some(v) = lookup("COMMENTGUARD_PORT") {
            self.port = parsed("COMMENTGUARD_PORT", v)?;
        }
        if let Some(v) = lookup("COMMENTGUARD_MODEL") {
            self.model = Some(PathBuf::from(v));
        }
        if let Some(v) = lookup("COMMENTGUARD_MODEL_ID") {
            self.model_id = Some(v);
        }
        if let Some(v) = lookup("COMMENTGUARD_REPORT_STORE") {
            self.report_store = PathBuf::from(v);
        }
        if let Some(v) = lookup("COMMENTGUARD_RATE_LIMIT") {
            self.rate_limit.per_second = parsed("COMMENTGUARD_RATE_LIMIT", v)?;
        }
        if let Some(v) = lookup("COMMENTGUARD_RATE_BURST") {
            self.rate_limit.burst = parsed("COMMENTGUARD_RATE_BURST", v)?;
        }
        if let Some(v) = lookup("COMMENTGUARD_CORS_ORIGINS") {
            self.cors_origins = v
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(String::from)
                .collect();
        }
        if let Some(v) = lookup("COMMENTGUARD_TEST_MODE") {
            self.test_mode = parse_bool(&v).ok_or(ConfigError::Env {
                var: "COMMENTGUARD_TEST_MODE",
                value: v,
            })?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let rl = &self.rate_limit;
        if rl.enabled
            && !(rl.per_second.is_finite()
                && rl.per_second > 0.0
                && rl.burst.is_finite()
                && rl.burst >= 1.0)
        {
            return Err(ConfigError::Invalid(
                "rate_limit needs per_second > 0 and burst >= 1",
            ));
        }
        Ok(())
    }

    pub fn addr(&self) -> SocketAddr {
        SocketAddr::new(self.host, self.port)
    }

    /// Whether the per-client limiter is active.
    pub fn rate_limited(&self) -> bool {
        self.rate_limit.enabled && !self.test_mode
    }
}
