//! Service settings read from the environment.

use std::fmt;
use std::path::PathBuf;

use thiserror::Error;

pub const ENV_SECRET: &str = "TAGGER_WEBHOOK_SECRET";
pub const ENV_APP_ID: &str = "TAGGER_APP_ID";
pub const ENV_PRIVATE_KEY_PATH: &str = "TAGGER_APP_PRIVATE_KEY_PATH";
pub const ENV_MODEL_PATH: &str = "TAGGER_MODEL_PATH";
pub const ENV_CONFIDENCE_FLOOR: &str = "TAGGER_CONFIDENCE_FLOOR";
pub const ENV_PORT: &str = "TAGGER_PORT";
pub const ENV_API_BASE: &str = "TAGGER_API_BASE";

pub const DEFAULT_PORT: u16 = 3000;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ConfigError {
    #[error("environment variable {0} is not set")]
    Missing(&'static str),
    #[error("environment variable {var}: {reason}")]
    Invalid { var: &'static str, reason: String },
}

#[derive(Clone, PartialEq)]
pub struct ServiceEnv {
    pub secret: String,
    pub app_id: String,
    pub private_key_path: PathBuf,
    pub model_path: Option<PathBuf>,
    pub confidence_floor: f64,
    pub port: u16,
    pub api_base: Option<String>,
}

impl fmt::Debug for ServiceEnv {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ServiceEnv")
            .field("secret", &"<redacted>")
            .field("app_id", &self.app_id)
            .field("private_key_path", &self.private_key_path)
            .field("model_path", &self.model_path)
            .field("confidence_floor", &self.confidence_floor)
            .field("port", &self.port)
            .field("api_base", &self.api_base)
            .finish()
    }
}

impl ServiceEnv {
    pub fn from_env() -> Result<Self, ConfigError> {
        Self::from_lookup(|name| std::env::var(name).ok())
    }

    /// Reads settings through `lookup`; empty values count as unset.
    pub fn from_lookup(lookup: impl Fn(&str) -> Option<String>) -> Result<Self, ConfigError> {
        let get = |name: &str| lookup(name).filter(|v| !v.is_empty());
        let required = |name: &'static str| get(name).ok_or(ConfigError::Missing(name));
        let confidence_floor = match get(ENV_CONFIDENCE_FLOOR) {
            None => 0.0,
            Some(raw) => raw
                .trim()
                .parse::<f64>()
                .ok()
                .filter(|v| (0.0..=1.0).contains(v))
                .ok_or_else(|| ConfigError::Invalid {
                    var: ENV_CONFIDENCE_FLOOR,
                    reason: format!("expected a number in [0, 1], got {raw:?}"),
                })?,
        };
        let port = match get(ENV_PORT) {
            None => DEFAULT_PORT,
            Some(raw) => raw.trim().parse().map_err(|_| ConfigError::Invalid {
                var: ENV_PORT,
                reason: format!("expected a port number, got {raw:?}"),
            })?,
        };
        Ok(Self {
            secret: required(ENV_SECRET)?,
            app_id: required(ENV_APP_ID)?,
            private_key_path: PathBuf::from(required(ENV_PRIVATE_KEY_PATH)?),
            model_path: get(ENV_MODEL_PATH).map(PathBuf::from),
            confidence_floor,
            port,
            api_base: get(ENV_API_BASE),
        })
    }
}
