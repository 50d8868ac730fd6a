//! Chat-completions HTTP provider.

use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{Provider, ProviderError, ProviderKind, Request};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RemoteConfig {
    /// e.g. `https://api.example.com/v1`; `/chat/completions` is appended.
    pub base_url: String,
    pub model: String,
    /// Name of the environment variable holding the API key.
    pub api_key_env: String,
    #[serde(default = "default_timeout")]
    pub timeout_s: f64,
    #[serde(default)]
    pub temperature: f64,
}

fn default_timeout() -> f64 {
    120.0
}

const SYSTEM: &str = "You are a careful software engineer. Answer with a single JSON object that follows the requested format exactly.";

pub struct RemoteProvider {
    config: RemoteConfig,
    api_key: String,
    agent: ureq::Agent,
}

impl RemoteProvider {
    /// Reads the key from the configured environment variable.
    pub fn from_env(config: RemoteConfig) -> Result<Self, ProviderError> {
        let api_key = std::env::var(&config.api_key_env).map_err(|_| {
            ProviderError::Unavailable(format!("environment variable {} is not set", config.api_key_env))
        })?;
        Ok(Self::with_key(config, api_key))
    }

    pub fn with_key(config: RemoteConfig, api_key: String) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs_f64(config.timeout_s)))
            .build()
            .into();
        Self { config, api_key, agent }
    }

    fn url(&self) -> String {
        format!("{}/chat/completions", self.config.base_url.trim_end_matches('/'))
    }
}

impl Provider for RemoteProvider {
    fn kind(&self) -> ProviderKind {
        ProviderKind::Remote
    }

    fn complete(&self, request: &Request<'_>) -> Result<String, ProviderError> {
        let mut messages = vec![
            json!({"role": "system", "content": SYSTEM}),
            json!({"role": "user", "content": request.prompt}),
        ];
        if let Some(err) = request.previous_error {
            messages.push(json!({
                "role": "user",
                "content": format!("Your previous answer was rejected: {err}. Reply again with only the JSON object."),
            }));
        }
        let body = json!({
            "model": self.config.model,
            "messages": messages,
            "max_tokens": request.envelope.budget,
            "temperature": self.config.temperature,
        });
        let mut resp = self
            .agent
            .post(&self.url())
            .header("Authorization", &format!("Bearer {}", self.api_key))
            .send_json(&body)
            .map_err(|e| ProviderError::Unavailable(e.to_string()))?;
        let value: Value = resp
            .body_mut()
            .read_json()
            .map_err(|e| ProviderError::Unavailable(format!("unreadable response: {e}")))?;
        value["choices"][0]["message"]["content"]
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| ProviderError::Unavailable("response has no choices[0].message.content".into()))
    }
}
