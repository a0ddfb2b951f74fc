//! Classification of opened issues and the HTTP front end.

use std::fmt;
use std::future::Future;
use std::num::NonZeroUsize;
use std::sync::{Arc, Mutex};
use std::time::Instant;

use axum::body::Bytes;
use axum::extract::State;
use axum::http::{HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use lru::LruCache;
use serde::{Deserialize, Serialize};
use serde_json::json;
use tagger_core::classifier::Model;
use tagger_core::text::{concatenate, RawIssue};
use tracing::{info, warn};

use crate::client::{ApiError, PlatformClient};
use crate::event::{parse_event, ParsedDelivery, WebhookEvent, DELIVERY_HEADER, EVENT_HEADER, SIGNATURE_HEADER};
use crate::signature::verify_signature;

pub const DEFAULT_DEDUP_CAPACITY: usize = 10_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum AssignmentOutcome {
    Applied,
    SkippedLowConfidence,
    ApiError { error: ApiError },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabelAssignment {
    pub repo_full_name: String,
    pub issue_number: u64,
    pub label: String,
    /// Score of `label`.
    pub confidence: f64,
    #[serde(flatten)]
    pub outcome: AssignmentOutcome,
}

/// Classifies the issue and, unless the top score is below
/// `confidence_floor`, adds the predicted label through `api`. API failures
/// are reported in the outcome, never raised.
pub async fn handle(
    event: &WebhookEvent,
    model: &Model,
    api: &dyn PlatformClient,
    confidence_floor: f64,
) -> LabelAssignment {
    let text = concatenate(&RawIssue::new(event.title.as_str(), event.body.as_str()));
    let prediction = model.predict_text(&text);
    let mut assignment = LabelAssignment {
        repo_full_name: event.repo_full_name.clone(),
        issue_number: event.issue_number,
        label: prediction.argmax_label.clone(),
        confidence: prediction.top_score(),
        outcome: AssignmentOutcome::Applied,
    };
    if assignment.confidence < confidence_floor {
        assignment.outcome = AssignmentOutcome::SkippedLowConfidence;
        return assignment;
    }
    let result = match api.installation_token(event.installation_id).await {
        Ok(token) => {
            api.add_labels(
                &token,
                &event.repo_full_name,
                event.issue_number,
                std::slice::from_ref(&assignment.label),
            )
            .await
        }
        Err(err) => Err(err),
    };
    if let Err(error) = result {
        assignment.outcome = AssignmentOutcome::ApiError { error };
    }
    assignment
}

/// Recently seen delivery ids. Check-and-insert is a single locked step.
pub struct DeliveryCache {
    seen: Mutex<LruCache<String, ()>>,
}

impl DeliveryCache {
    pub fn new(capacity: usize) -> Self {
        let capacity = NonZeroUsize::new(capacity).unwrap_or(NonZeroUsize::MIN);
        Self {
            seen: Mutex::new(LruCache::new(capacity)),
        }
    }

    /// Records `id`; false when it was already present.
    pub fn insert_new(&self, id: &str) -> bool {
        let mut seen = self.seen.lock().expect("dedup lock");
        if seen.get(id).is_some() {
            return false;
        }
        seen.put(id.to_owned(), ());
        true
    }

    /// Drops `id` so a redelivery is processed again.
    pub fn forget(&self, id: &str) {
        self.seen.lock().expect("dedup lock").pop(id);
    }

    pub fn len(&self) -> usize {
        self.seen.lock().expect("dedup lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Clone)]
pub struct ServiceConfig {
    pub secret: Vec<u8>,
    pub confidence_floor: f64,
    pub dedup_capacity: usize,
}

impl ServiceConfig {
    pub fn new(secret: impl Into<Vec<u8>>) -> Self {
        Self {
            secret: secret.into(),
            confidence_floor: 0.0,
            dedup_capacity: DEFAULT_DEDUP_CAPACITY,
        }
    }
}

impl fmt::Debug for ServiceConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ServiceConfig")
            .field("secret", &"<redacted>")
            .field("confidence_floor", &self.confidence_floor)
            .field("dedup_capacity", &self.dedup_capacity)
            .finish()
    }
}

/// Shared, read-mostly state behind every request.
pub struct ServiceState {
    model: Arc<Model>,
    model_fingerprint: String,
    client: Arc<dyn PlatformClient>,
    config: ServiceConfig,
    deliveries: DeliveryCache,
    started: Instant,
}

impl ServiceState {
    pub fn new(model: Arc<Model>, client: Arc<dyn PlatformClient>, config: ServiceConfig) -> Self {
        Self {
            model_fingerprint: model.fingerprint(),
            deliveries: DeliveryCache::new(config.dedup_capacity),
            model,
            client,
            config,
            started: Instant::now(),
        }
    }

    pub fn model_fingerprint(&self) -> &str {
        &self.model_fingerprint
    }

    pub fn deliveries(&self) -> &DeliveryCache {
        &self.deliveries
    }
}

pub fn router(state: Arc<ServiceState>) -> Router {
    Router::new()
        .route("/webhook", post(webhook))
        .route("/healthz", get(healthz))
        .with_state(state)
}

fn header<'a>(headers: &'a HeaderMap, name: &str) -> Option<&'a str> {
    headers.get(name).and_then(|v| v.to_str().ok())
}

fn reply(status: StatusCode, body: serde_json::Value) -> Response {
    (status, Json(body)).into_response()
}

async fn webhook(State(state): State<Arc<ServiceState>>, headers: HeaderMap, body: Bytes) -> Response {
    let delivery = header(&headers, DELIVERY_HEADER).unwrap_or("-").to_owned();
    let signature = header(&headers, SIGNATURE_HEADER).unwrap_or("");
    if !verify_signature(&body, signature, &state.config.secret) {
        warn!(delivery = %delivery, "rejected delivery with invalid signature");
        return reply(StatusCode::UNAUTHORIZED, json!({"status": "unauthorized"}));
    }
    let event = match parse_event(&body, header(&headers, EVENT_HEADER), header(&headers, DELIVERY_HEADER)) {
        Ok(ParsedDelivery::Event(event)) => event,
        Ok(ParsedDelivery::Ignore(reason)) => {
            info!(delivery = %delivery, %reason, "ignored delivery");
            return reply(StatusCode::OK, json!({"status": "ignored", "reason": reason}));
        }
        Err(err) => {
            warn!(delivery = %delivery, error = %err, "malformed delivery");
            return reply(StatusCode::BAD_REQUEST, json!({"status": "malformed", "error": err.to_string()}));
        }
    };
    if !state.deliveries.insert_new(&event.delivery_id) {
        info!(delivery = %delivery, "duplicate delivery");
        return reply(StatusCode::OK, json!({"status": "duplicate"}));
    }
    let assignment = handle(&event, &state.model, state.client.as_ref(), state.config.confidence_floor).await;
    match &assignment.outcome {
        AssignmentOutcome::ApiError { error } => {
            state.deliveries.forget(&event.delivery_id);
            warn!(
                delivery = %delivery,
                repo = %assignment.repo_full_name,
                issue = assignment.issue_number,
                error = %error,
                retryable = error.retryable,
                "label assignment failed"
            );
        }
        outcome => info!(
            delivery = %delivery,
            repo = %assignment.repo_full_name,
            issue = assignment.issue_number,
            label = %assignment.label,
            confidence = assignment.confidence,
            ?outcome,
            "classified issue"
        ),
    }
    reply(StatusCode::OK, json!({"status": "processed", "assignment": assignment}))
}

async fn healthz(State(state): State<Arc<ServiceState>>) -> Response {
    reply(
        StatusCode::OK,
        json!({
            "status": "ok",
            "model_fingerprint": state.model_fingerprint,
            "uptime_seconds": state.started.elapsed().as_secs(),
        }),
    )
}

/// Serves until `shutdown` resolves, then lets in-flight requests finish.
pub async fn run(
    listener: tokio::net::TcpListener,
    state: Arc<ServiceState>,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, router(state)).with_graceful_shutdown(shutdown).await
}

/// Resolves on Ctrl-C, or SIGTERM on Unix.
pub async fn shutdown_signal() {
    let ctrl_c = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    #[cfg(unix)]
    let terminate = async {
        match tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
            Ok(mut signal) => {
                signal.recv().await;
            }
            Err(_) => std::future::pending::<()>().await,
        }
    };
    #[cfg(not(unix))]
    let terminate = std::future::pending::<()>();
    tokio::select! {
        _ = ctrl_c => {},
        _ = terminate => {},
    }
}
