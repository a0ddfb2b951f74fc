//! Webhook service that labels newly opened issues: verifies deliveries,
//! classifies the issue text and writes the predicted label back through the
//! hosting platform's REST API.

pub mod client;
pub mod config;
pub mod event;
pub mod service;
pub mod signature;

pub use client::{
    AccessToken, ApiCall, ApiError, ApiOperation, HttpClientConfig, HttpPlatformClient, MockPlatformClient,
    PlatformClient,
};
pub use config::{ConfigError, ServiceEnv};
pub use event::{parse_event, ParsedDelivery, PayloadError, WebhookEvent};
pub use service::{
    handle, router, run, shutdown_signal, AssignmentOutcome, DeliveryCache, LabelAssignment, ServiceConfig,
    ServiceState,
};
pub use signature::{sign, verify_signature};
