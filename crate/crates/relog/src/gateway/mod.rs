//! Structured completions over interchangeable providers.
//!
//! A [`PromptEnvelope`] names a template, fills its slots and says which
//! [`Schema`] the answer must satisfy. The [`Gateway`] renders the prompt,
//! asks the provider, extracts and validates JSON, and retries malformed
//! answers up to `retry_limit` times.

pub mod remote;
pub mod replay;
pub mod schema;
pub mod stub;
pub mod templates;

use std::collections::BTreeMap;

use relog_core::digest::FieldHasher;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

pub use replay::{ReplayEntry, ReplayProvider, ReplayStore};
pub use schema::{extract_json, DebugVerdict, EditList, Location, Schema};
pub use templates::{PromptTemplate, TemplateSet};

pub const DEFAULT_RETRY_LIMIT: u32 = 2;
pub const DEFAULT_BUDGET: u32 = 2048;

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("no valid {schema:?} answer after {attempts} attempts: {reason}")]
    MalformedAfterRetries {
        schema: Schema,
        attempts: u32,
        reason: String,
        last_raw: String,
    },
    #[error("provider unavailable: {0}")]
    ProviderUnavailable(String),
    #[error("no recording for {template_id} envelope {digest}")]
    ReplayMiss { template_id: String, digest: String },
    #[error("template {template} needs slot {slot:?}")]
    MissingSlot { template: String, slot: String },
    #[error("unknown template {0:?}")]
    UnknownTemplate(String),
    #[error("cannot write replay store: {0}")]
    StoreWriteFailure(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptEnvelope {
    pub template_id: String,
    pub slots: BTreeMap<String, String>,
    pub expected_schema: Schema,
    /// Maximum output tokens.
    pub budget: u32,
}

impl PromptEnvelope {
    pub fn new(template_id: &str, expected_schema: Schema) -> Self {
        Self { template_id: template_id.to_string(), slots: BTreeMap::new(), expected_schema, budget: DEFAULT_BUDGET }
    }

    pub fn slot(mut self, name: &str, text: impl Into<String>) -> Self {
        self.slots.insert(name.to_string(), text.into());
        self
    }

    pub fn get(&self, name: &str) -> &str {
        self.slots.get(name).map(String::as_str).unwrap_or("")
    }

    /// Replay key over (template id, template version, slot names and texts).
    pub fn digest(&self, template_version: &str) -> String {
        let mut h = FieldHasher::new();
        h.field(self.template_id.as_bytes()).field(template_version.as_bytes());
        for (k, v) in &self.slots {
            h.field(k.as_bytes()).field(v.as_bytes());
        }
        h.finish_hex()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProviderKind {
    Remote,
    Replay,
    Stub,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructuredResponse {
    pub payload: Value,
    pub raw: String,
    pub provider: ProviderKind,
    pub attempts: u32,
    pub digest: String,
}

/// What a provider sees for one attempt.
pub struct Request<'a> {
    pub envelope: &'a PromptEnvelope,
    pub prompt: &'a str,
    pub digest: &'a str,
    /// 1-based.
    pub attempt: u32,
    /// Why the previous attempt was rejected.
    pub previous_error: Option<&'a str>,
}

#[derive(Debug, Error)]
pub enum ProviderError {
    #[error("{0}")]
    Unavailable(String),
    #[error("replay miss for {0}")]
    ReplayMiss(String),
}

pub trait Provider: Send + Sync {
    fn kind(&self) -> ProviderKind;
    fn complete(&self, request: &Request<'_>) -> Result<String, ProviderError>;
}

/// Record of one completed call, as it goes into a run ledger.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CallRecord {
    pub stage: String,
    pub template_id: String,
    pub envelope_digest: String,
}

pub struct Gateway {
    provider: Box<dyn Provider>,
    templates: TemplateSet,
    retry_limit: u32,
    recorder: Option<ReplayStore>,
}

impl Gateway {
    pub fn new(provider: Box<dyn Provider>) -> Self {
        Self { provider, templates: TemplateSet::builtin(), retry_limit: DEFAULT_RETRY_LIMIT, recorder: None }
    }

    pub fn with_retry_limit(mut self, retry_limit: u32) -> Self {
        self.retry_limit = retry_limit;
        self
    }

    pub fn with_templates(mut self, templates: TemplateSet) -> Self {
        self.templates = templates;
        self
    }

    /// Persists every validated answer into `store`.
    pub fn recording_to(mut self, store: ReplayStore) -> Self {
        self.recorder = Some(store);
        self
    }

    pub fn kind(&self) -> ProviderKind {
        self.provider.kind()
    }

    pub fn retry_limit(&self) -> u32 {
        self.retry_limit
    }

    pub fn envelope_digest(&self, env: &PromptEnvelope) -> Result<String, GatewayError> {
        Ok(env.digest(&self.templates.get(&env.template_id)?.version))
    }

    pub fn complete(&self, env: &PromptEnvelope) -> Result<StructuredResponse, GatewayError> {
        let template = self.templates.get(&env.template_id)?;
        let prompt = template.render(&env.slots)?;
        let digest = env.digest(&template.version);
        let max_attempts = 1 + self.retry_limit;
        let mut last_raw = String::new();
        let mut reason = String::new();
        for attempt in 1..=max_attempts {
            let request = Request {
                envelope: env,
                prompt: &prompt,
                digest: &digest,
                attempt,
                previous_error: (attempt > 1).then_some(reason.as_str()),
            };
            let raw = self.provider.complete(&request).map_err(|e| match e {
                ProviderError::Unavailable(m) => GatewayError::ProviderUnavailable(m),
                ProviderError::ReplayMiss(d) => {
                    GatewayError::ReplayMiss { template_id: env.template_id.clone(), digest: d }
                }
            })?;
            let checked = extract_json(&raw)
                .ok_or_else(|| "answer contains no JSON object".to_string())
                .and_then(|v| env.expected_schema.validate(&v).map(|()| v));
            match checked {
                Ok(payload) => {
                    if let Some(store) = &self.recorder {
                        store.put(&ReplayEntry {
                            digest: digest.clone(),
                            template_id: env.template_id.clone(),
                            template_version: template.version.clone(),
                            raw: raw.clone(),
                        })?;
                    }
                    tracing::debug!(template = %env.template_id, attempt, "completion accepted");
                    return Ok(StructuredResponse {
                        payload,
                        raw,
                        provider: self.provider.kind(),
                        attempts: attempt,
                        digest,
                    });
                }
                Err(e) => {
                    tracing::warn!(template = %env.template_id, attempt, error = %e, "malformed completion");
                    reason = e;
                    last_raw = raw;
                }
            }
        }
        Err(GatewayError::MalformedAfterRetries {
            schema: env.expected_schema,
            attempts: max_attempts,
            reason,
            last_raw,
        })
    }

    /// [`Gateway::complete`] followed by typed decoding of the payload.
    pub fn complete_as<T: DeserializeOwned>(
        &self,
        env: &PromptEnvelope,
    ) -> Result<(T, StructuredResponse), GatewayError> {
        let resp = self.complete(env)?;
        let value = T::deserialize(&resp.payload).map_err(|e| GatewayError::MalformedAfterRetries {
            schema: env.expected_schema,
            attempts: resp.attempts,
            reason: e.to_string(),
            last_raw: resp.raw.clone(),
        })?;
        Ok((value, resp))
    }
}
