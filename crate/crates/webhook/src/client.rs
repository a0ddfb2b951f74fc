//! Hosting-platform REST access: installation tokens and label writes.

use std::collections::HashMap;
use std::fmt;
use std::sync::Mutex;
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use async_trait::async_trait;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tokens this close to expiry are treated as expired.
pub const EXPIRY_MARGIN: Duration = Duration::from_secs(60);

/// Short-lived installation credential. Its value never appears in `Debug`
/// output and it is not serializable.
#[derive(Clone, PartialEq, Eq)]
pub struct AccessToken {
    token: String,
    expires_at: SystemTime,
}

impl AccessToken {
    pub fn new(token: impl Into<String>, expires_at: SystemTime) -> Self {
        Self {
            token: token.into(),
            expires_at,
        }
    }

    pub fn secret(&self) -> &str {
        &self.token
    }

    pub fn expires_at(&self) -> SystemTime {
        self.expires_at
    }

    pub fn is_usable_at(&self, now: SystemTime) -> bool {
        now + EXPIRY_MARGIN < self.expires_at
    }
}

impl fmt::Debug for AccessToken {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AccessToken")
            .field("token", &"<redacted>")
            .field("expires_at", &self.expires_at)
            .finish()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ApiOperation {
    InstallationToken,
    AddLabels,
}

#[derive(Clone, Debug, Error, PartialEq, Eq, Serialize, Deserialize)]
#[error("{operation:?} failed: {message}")]
pub struct ApiError {
    pub operation: ApiOperation,
    pub status: Option<u16>,
    pub message: String,
    /// Whether the same call may succeed later.
    pub retryable: bool,
    /// Server-provided wait before retrying.
    pub retry_after_secs: Option<u64>,
}

impl ApiError {
    pub fn from_status(operation: ApiOperation, status: u16, retry_after_secs: Option<u64>) -> Self {
        Self {
            operation,
            status: Some(status),
            message: format!("HTTP {status}"),
            retryable: status == 429 || status >= 500 || retry_after_secs.is_some(),
            retry_after_secs,
        }
    }

    pub fn transport(operation: ApiOperation, message: impl Into<String>) -> Self {
        Self {
            operation,
            status: None,
            message: message.into(),
            retryable: true,
            retry_after_secs: None,
        }
    }
}

#[async_trait]
pub trait PlatformClient: Send + Sync {
    async fn installation_token(&self, installation_id: u64) -> Result<AccessToken, ApiError>;

    /// `POST /repos/{repo}/issues/{number}/labels` with `{"labels": [...]}`.
    async fn add_labels(
        &self,
        token: &AccessToken,
        repo_full_name: &str,
        issue_number: u64,
        labels: &[String],
    ) -> Result<(), ApiError>;
}

/// Endpoint layout and app credentials for [`HttpPlatformClient`].
#[derive(Clone)]
pub struct HttpClientConfig {
    pub api_base: String,
    pub app_id: String,
    pub private_key_pem: Vec<u8>,
    /// `{installation_id}` is substituted.
    pub token_path: String,
    /// `{repo}` and `{number}` are substituted.
    pub labels_path: String,
    pub user_agent: String,
}

impl HttpClientConfig {
    pub const DEFAULT_API_BASE: &'static str = "https://api.github.com";
    pub const DEFAULT_TOKEN_PATH: &'static str = "/app/installations/{installation_id}/access_tokens";
    pub const DEFAULT_LABELS_PATH: &'static str = "/repos/{repo}/issues/{number}/labels";

    pub fn new(app_id: impl Into<String>, private_key_pem: Vec<u8>) -> Self {
        Self {
            api_base: Self::DEFAULT_API_BASE.to_owned(),
            app_id: app_id.into(),
            private_key_pem,
            token_path: Self::DEFAULT_TOKEN_PATH.to_owned(),
            labels_path: Self::DEFAULT_LABELS_PATH.to_owned(),
            user_agent: concat!("issue-tagger/", env!("CARGO_PKG_VERSION")).to_owned(),
        }
    }
}

impl fmt::Debug for HttpClientConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HttpClientConfig")
            .field("api_base", &self.api_base)
            .field("app_id", &self.app_id)
            .field("private_key_pem", &"<redacted>")
            .field("token_path", &self.token_path)
            .field("labels_path", &self.labels_path)
            .finish()
    }
}

#[derive(Debug, Error)]
pub enum ClientSetupError {
    #[error("app private key is not a valid RSA PEM key")]
    BadKey,
    #[error("HTTP client setup failed: {0}")]
    Http(String),
}

#[derive(Serialize)]
struct AppClaims<'a> {
    iat: u64,
    exp: u64,
    iss: &'a str,
}

#[derive(Deserialize)]
struct TokenResponse {
    token: String,
    expires_at: String,
}

/// Real client: signs an app JWT (RS256), exchanges it for an installation
/// token, and caches tokens per installation until shortly before expiry.
pub struct HttpPlatformClient {
    config: HttpClientConfig,
    key: jsonwebtoken::EncodingKey,
    http: reqwest::Client,
    tokens: Mutex<HashMap<u64, AccessToken>>,
}

impl HttpPlatformClient {
    pub fn new(config: HttpClientConfig) -> Result<Self, ClientSetupError> {
        let key = jsonwebtoken::EncodingKey::from_rsa_pem(&config.private_key_pem).map_err(|_| ClientSetupError::BadKey)?;
        let http = reqwest::Client::builder()
            .user_agent(config.user_agent.clone())
            .timeout(Duration::from_secs(10))
            .build()
            .map_err(|e| ClientSetupError::Http(e.to_string()))?;
        Ok(Self {
            config,
            key,
            http,
            tokens: Mutex::new(HashMap::new()),
        })
    }

    fn url(&self, path: &str) -> String {
        format!("{}{}", self.config.api_base.trim_end_matches('/'), path)
    }

    fn app_jwt(&self) -> Result<String, ApiError> {
        let now = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .unwrap_or_default()
            .as_secs();
        // Backdated to tolerate clock drift; the platform caps lifetime at ten minutes.
        let claims = AppClaims {
            iat: now.saturating_sub(60),
            exp: now + 540,
            iss: &self.config.app_id,
        };
        jsonwebtoken::encode(&jsonwebtoken::Header::new(jsonwebtoken::Algorithm::RS256), &claims, &self.key)
            .map_err(|e| ApiError::transport(ApiOperation::InstallationToken, format!("signing app JWT: {e}")))
    }

    fn cached(&self, installation_id: u64) -> Option<AccessToken> {
        let tokens = self.tokens.lock().expect("token cache lock");
        tokens
            .get(&installation_id)
            .filter(|t| t.is_usable_at(SystemTime::now()))
            .cloned()
    }
}

fn retry_after(response: &reqwest::Response) -> Option<u64> {
    response
        .headers()
        .get(reqwest::header::RETRY_AFTER)
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.trim().parse().ok())
}

fn parse_expiry(text: &str) -> Option<SystemTime> {
    let t = time::OffsetDateTime::parse(text, &time::format_description::well_known::Rfc3339).ok()?;
    let secs = u64::try_from(t.unix_timestamp()).ok()?;
    Some(UNIX_EPOCH + Duration::from_secs(secs))
}

#[async_trait]
impl PlatformClient for HttpPlatformClient {
    async fn installation_token(&self, installation_id: u64) -> Result<AccessToken, ApiError> {
        if let Some(token) = self.cached(installation_id) {
            return Ok(token);
        }
        let op = ApiOperation::InstallationToken;
        let jwt = self.app_jwt()?;
        let path = self
            .config
            .token_path
            .replace("{installation_id}", &installation_id.to_string());
        let response = self
            .http
            .post(self.url(&path))
            .bearer_auth(jwt)
            .header(reqwest::header::ACCEPT, "application/vnd.github+json")
            .send()
            .await
            .map_err(|e| ApiError::transport(op, e.without_url().to_string()))?;
        if !response.status().is_success() {
            return Err(ApiError::from_status(op, response.status().as_u16(), retry_after(&response)));
        }
        let body: TokenResponse = response
            .json()
            .await
            .map_err(|_| ApiError::transport(op, "token response is not the expected JSON"))?;
        let expires_at =
            parse_expiry(&body.expires_at).ok_or_else(|| ApiError::transport(op, "token expiry is not RFC 3339"))?;
        let token = AccessToken::new(body.token, expires_at);
        if !token.is_usable_at(SystemTime::now()) {
            return Err(ApiError::transport(op, "platform returned an already expired token"));
        }
        self.tokens
            .lock()
            .expect("token cache lock")
            .insert(installation_id, token.clone());
        Ok(token)
    }

    async fn add_labels(
        &self,
        token: &AccessToken,
        repo_full_name: &str,
        issue_number: u64,
        labels: &[String],
    ) -> Result<(), ApiError> {
        let op = ApiOperation::AddLabels;
        if !token.is_usable_at(SystemTime::now()) {
            return Err(ApiError::transport(op, "installation token expired"));
        }
        let path = self
            .config
            .labels_path
            .replace("{repo}", repo_full_name)
            .replace("{number}", &issue_number.to_string());
        let response = self
            .http
            .post(self.url(&path))
            .bearer_auth(token.secret())
            .header(reqwest::header::ACCEPT, "application/vnd.github+json")
            .json(&serde_json::json!({ "labels": labels }))
            .send()
            .await
            .map_err(|e| ApiError::transport(op, e.without_url().to_string()))?;
        if response.status().is_success() {
            Ok(())
        } else {
            Err(ApiError::from_status(op, response.status().as_u16(), retry_after(&response)))
        }
    }
}

/// One recorded call on [`MockPlatformClient`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ApiCall {
    InstallationToken {
        installation_id: u64,
    },
    AddLabels {
        repo_full_name: String,
        issue_number: u64,
        labels: Vec<String>,
    },
}

/// In-memory client that records every call and can be told to fail.
#[derive(Debug, Default)]
pub struct MockPlatformClient {
    calls: Mutex<Vec<ApiCall>>,
    token_failure: Option<ApiError>,
    label_failure: Option<ApiError>,
    token_value: Option<String>,
}

impl MockPlatformClient {
    pub fn new() -> Self {
        Self::default()
    }

    /// Issues tokens with this value instead of a generated one.
    pub fn with_token_value(mut self, value: impl Into<String>) -> Self {
        self.token_value = Some(value.into());
        self
    }

    pub fn failing_tokens(mut self, error: ApiError) -> Self {
        self.token_failure = Some(error);
        self
    }

    pub fn failing_labels(mut self, error: ApiError) -> Self {
        self.label_failure = Some(error);
        self
    }

    pub fn calls(&self) -> Vec<ApiCall> {
        self.calls.lock().expect("call log lock").clone()
    }

    pub fn label_calls(&self) -> Vec<ApiCall> {
        self.calls()
            .into_iter()
            .filter(|c| matches!(c, ApiCall::AddLabels { .. }))
            .collect()
    }

    fn record(&self, call: ApiCall) {
        self.calls.lock().expect("call log lock").push(call);
    }
}

#[async_trait]
impl PlatformClient for MockPlatformClient {
    async fn installation_token(&self, installation_id: u64) -> Result<AccessToken, ApiError> {
        self.record(ApiCall::InstallationToken { installation_id });
        if let Some(err) = &self.token_failure {
            return Err(err.clone());
        }
        let value = self
            .token_value
            .clone()
            .unwrap_or_else(|| format!("mock-token-{installation_id}"));
        Ok(AccessToken::new(value, SystemTime::now() + Duration::from_secs(3600)))
    }

    async fn add_labels(
        &self,
        token: &AccessToken,
        repo_full_name: &str,
        issue_number: u64,
        labels: &[String],
    ) -> Result<(), ApiError> {
        self.record(ApiCall::AddLabels {
            repo_full_name: repo_full_name.to_owned(),
            issue_number,
            labels: labels.to_vec(),
        });
        if !token.is_usable_at(SystemTime::now()) {
            return Err(ApiError::transport(ApiOperation::AddLabels, "installation token expired"));
        }
        match &self.label_failure {
            Some(err) => Err(err.clone()),
            None => Ok(()),
        }
    }
}
