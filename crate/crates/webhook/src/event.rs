//! Parsing of `issues` deliveries.

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const EVENT_HEADER: &str = "x-github-event";
pub const DELIVERY_HEADER: &str = "x-github-delivery";
pub const SIGNATURE_HEADER: &str = "x-hub-signature-256";

/// A newly opened issue.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WebhookEvent {
    pub delivery_id: String,
    pub event_kind: String,
    pub action: String,
    pub repo_full_name: String,
    pub issue_number: u64,
    pub title: String,
    pub body: String,
    pub installation_id: u64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ParsedDelivery {
    Event(WebhookEvent),
    /// Acknowledged without action.
    Ignore(String),
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PayloadError {
    #[error("missing {0} header")]
    MissingHeader(&'static str),
    #[error("payload is not valid JSON: {0}")]
    NotJson(String),
    #[error("payload field {0} is missing or has the wrong type")]
    MissingField(&'static str),
    #[error("issue number must be at least 1")]
    BadIssueNumber,
    #[error("repository name {0:?} is not owner/name")]
    BadRepoName(String),
}

#[derive(Deserialize)]
struct Payload {
    action: Option<String>,
    issue: Option<IssuePayload>,
    repository: Option<RepoPayload>,
    installation: Option<InstallationPayload>,
}

#[derive(Deserialize)]
struct IssuePayload {
    number: Option<u64>,
    title: Option<String>,
    body: Option<String>,
}

#[derive(Deserialize)]
struct RepoPayload {
    full_name: Option<String>,
}

#[derive(Deserialize)]
struct InstallationPayload {
    id: Option<u64>,
}

/// Parses a delivery whose signature was already checked. `event_kind` and
/// `delivery_id` come from the delivery headers.
///
/// Deliveries of another event kind, or `issues` actions other than
/// `opened`, are ignored. A missing or null body becomes the empty string;
/// a missing title is an error.
pub fn parse_event(
    raw_body: &[u8],
    event_kind: Option<&str>,
    delivery_id: Option<&str>,
) -> Result<ParsedDelivery, PayloadError> {
    let event_kind = event_kind.ok_or(PayloadError::MissingHeader(EVENT_HEADER))?;
    if event_kind != "issues" {
        return Ok(ParsedDelivery::Ignore(format!("event kind {event_kind:?} is not handled")));
    }
    let delivery_id = delivery_id
        .filter(|d| !d.is_empty())
        .ok_or(PayloadError::MissingHeader(DELIVERY_HEADER))?;
    let payload: Payload = serde_json::from_slice(raw_body).map_err(|e| PayloadError::NotJson(e.to_string()))?;
    let action = payload.action.ok_or(PayloadError::MissingField("action"))?;
    if action != "opened" {
        return Ok(ParsedDelivery::Ignore(format!("issues action {action:?} is not handled")));
    }
    let issue = payload.issue.ok_or(PayloadError::MissingField("issue"))?;
    let issue_number = issue.number.ok_or(PayloadError::MissingField("issue.number"))?;
    if issue_number == 0 {
        return Err(PayloadError::BadIssueNumber);
    }
    let title = issue.title.ok_or(PayloadError::MissingField("issue.title"))?;
    let repo_full_name = payload
        .repository
        .and_then(|r| r.full_name)
        .ok_or(PayloadError::MissingField("repository.full_name"))?;
    let mut parts = repo_full_name.split('/');
    let well_formed = matches!(
        (parts.next(), parts.next(), parts.next()),
        (Some(owner), Some(name), None) if !owner.is_empty() && !name.is_empty()
    );
    if !well_formed {
        return Err(PayloadError::BadRepoName(repo_full_name));
    }
    let installation_id = payload
        .installation
        .and_then(|i| i.id)
        .ok_or(PayloadError::MissingField("installation.id"))?;
    Ok(ParsedDelivery::Event(WebhookEvent {
        delivery_id: delivery_id.to_owned(),
        event_kind: event_kind.to_owned(),
        action,
        repo_full_name,
        issue_number,
        title,
        body: issue.body.unwrap_or_default(),
        installation_id,
    }))
}
