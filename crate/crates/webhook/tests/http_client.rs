//! The real client against a local stand-in for the platform API.

use std::sync::{Arc, Mutex};
use std::time::{Duration, SystemTime};

use axum::extract::{Path, State};
use axum::http::{HeaderMap, StatusCode};
use axum::routing::post;
use axum::{Json, Router};
use jsonwebtoken::{decode, Algorithm, DecodingKey, Validation};
use serde_json::{json, Value};
use tagger_webhook::{ApiOperation, HttpClientConfig, HttpPlatformClient, PlatformClient};

const KEY: &[u8] = include_bytes!("fixtures/test_app_key.pem");
const PUBLIC_KEY: &[u8] = include_bytes!("fixtures/test_app_key.pub.pem");

#[derive(Default)]
struct Seen {
    token_requests: Vec<(u64, String)>,
    label_requests: Vec<(String, String, u64, Value)>,
}

type Shared = Arc<Mutex<Seen>>;

fn bearer(headers: &HeaderMap) -> String {
    headers
        .get("authorization")
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.strip_prefix("Bearer "))
        .unwrap_or_default()
        .to_owned()
}

async fn token(State(seen): State<Shared>, Path(id): Path<u64>, headers: HeaderMap) -> (StatusCode, Json<Value>) {
    seen.lock().unwrap().token_requests.push((id, bearer(&headers)));
    (
        StatusCode::CREATED,
        Json(json!({"token": format!("ghs_test_{id}"), "expires_at": "2999-01-01T00:00:00Z"})),
    )
}

async fn labels(
    State(seen): State<Shared>,
    Path((owner, repo, number)): Path<(String, String, u64)>,
    headers: HeaderMap,
    Json(body): Json<Value>,
) -> StatusCode {
    seen.lock()
        .unwrap()
        .label_requests
        .push((format!("{owner}/{repo}"), bearer(&headers), number, body));
    if number == 500 {
        StatusCode::SERVICE_UNAVAILABLE
    } else {
        StatusCode::OK
    }
}

async fn start() -> (String, Shared) {
    let seen = Shared::default();
    let app = Router::new()
        .route("/api/v3/app/installations/{id}/access_tokens", post(token))
        .route("/api/v3/repos/{owner}/{repo}/issues/{number}/labels", post(labels))
        .with_state(seen.clone());
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(async move { axum::serve(listener, app).await.unwrap() });
    (format!("http://{addr}/api/v3"), seen)
}

#[tokio::test]
async fn token_exchange_and_label_call() {
    let (base, seen) = start().await;
    let mut config = HttpClientConfig::new("4242", KEY.to_vec());
    config.api_base = base;
    let client = HttpPlatformClient::new(config).unwrap();

    let token = client.installation_token(77).await.unwrap();
    assert_eq!(token.secret(), "ghs_test_77");
    assert!(token.expires_at() > SystemTime::now() + Duration::from_secs(3600));
    // cached: no second exchange
    client.installation_token(77).await.unwrap();

    client
        .add_labels(&token, "octo/app", 9, &["question".to_string()])
        .await
        .unwrap();
    let err = client
        .add_labels(&token, "octo/app", 500, &["bug".to_string()])
        .await
        .unwrap_err();
    assert_eq!((err.operation, err.status, err.retryable), (ApiOperation::AddLabels, Some(503), true));

    let seen = seen.lock().unwrap();
    assert_eq!(seen.token_requests.len(), 1);
    let (id, jwt) = &seen.token_requests[0];
    assert_eq!(*id, 77);
    let mut validation = Validation::new(Algorithm::RS256);
    validation.set_required_spec_claims(&["exp", "iat", "iss"]);
    validation.set_issuer(&["4242"]);
    let claims = decode::<Value>(jwt, &DecodingKey::from_rsa_pem(PUBLIC_KEY).unwrap(), &validation).unwrap();
    assert!(claims.claims["exp"].as_u64().unwrap() > claims.claims["iat"].as_u64().unwrap());

    let (repo, auth, number, body) = &seen.label_requests[0];
    assert_eq!((repo.as_str(), auth.as_str(), *number), ("octo/app", "ghs_test_77", 9));
    assert_eq!(body, &json!({"labels": ["question"]}));
}

#[tokio::test]
async fn unreachable_api_is_retryable() {
    let mut config = HttpClientConfig::new("1", KEY.to_vec());
    config.api_base = "http://127.0.0.1:9".into();
    let client = HttpPlatformClient::new(config).unwrap();
    let err = client.installation_token(1).await.unwrap_err();
    assert_eq!(err.operation, ApiOperation::InstallationToken);
    assert!(err.retryable && err.status.is_none());
}
