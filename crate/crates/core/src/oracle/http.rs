//! Chat-completion client for live language models.

use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{OracleBackend, OracleError, OracleQuery};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HttpConfig {
    pub endpoint: String,
    pub model: String,
    /// Name of the environment variable holding the bearer token.
    pub api_key_env: String,
    pub timeout_secs: f64,
    /// Retries after the first attempt.
    pub max_retries: u32,
    /// First backoff delay; doubles on every retry.
    pub backoff_ms: u64,
}

impl Default for HttpConfig {
    fn default() -> Self {
        Self {
            endpoint: "https://api.openai.com/v1/chat/completions".into(),
            model: "gpt-4".into(),
            api_key_env: "OPENAI_API_KEY".into(),
            timeout_secs: 60.0,
            max_retries: 3,
            backoff_ms: 500,
        }
    }
}

#[derive(Debug)]
pub struct HttpBackend {
    config: HttpConfig,
    api_key: String,
    client: reqwest::blocking::Client,
}

impl HttpBackend {
    /// Reads the credential from the configured environment variable.
    pub fn new(config: HttpConfig) -> Result<Self, OracleError> {
        let api_key = std::env::var(&config.api_key_env)
            .ok()
            .filter(|k| !k.is_empty())
            .ok_or_else(|| OracleError::MissingCredential(config.api_key_env.clone()))?;
        Self::with_key(config, api_key)
    }

    pub fn with_key(config: HttpConfig, api_key: String) -> Result<Self, OracleError> {
        if !(config.timeout_secs > 0.0) {
            return Err(OracleError::Invalid("timeout must be positive".into()));
        }
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs_f64(config.timeout_secs))
            .build()
            .map_err(|e| OracleError::Invalid(e.to_string()))?;
        Ok(Self {
            config,
            api_key,
            client,
        })
    }

    pub fn config(&self) -> &HttpConfig {
        &self.config
    }

    fn request_body(&self, query: &OracleQuery) -> Value {
        json!({
            "model": self.config.model,
            "temperature": query.temperature,
            "messages": [{"role": "user", "content": query.prompt}],
        })
    }
}

fn extract_completion(body: &Value) -> Option<&str> {
    let choice = body.get("choices")?.get(0)?;
    choice
        .get("message")
        .and_then(|m| m.get("content"))
        .or_else(|| choice.get("text"))
        .and_then(Value::as_str)
}

impl OracleBackend for HttpBackend {
    fn backend_id(&self) -> String {
        format!("http:{}", self.config.model)
    }

    fn complete(&self, query: &OracleQuery) -> Result<String, OracleError> {
        let body = self.request_body(query);
        let mut attempts = 0;
        loop {
            attempts += 1;
            let retry_reason = match self
                .client
                .post(&self.config.endpoint)
                .bearer_auth(&self.api_key)
                .json(&body)
                .send()
            {
                Ok(resp) => {
                    let status = resp.status();
                    if status.is_success() {
                        let parsed: Value = resp.json().map_err(|e| OracleError::Transport {
                            attempts,
                            message: format!("unreadable response body: {e}"),
                        })?;
                        return match extract_completion(&parsed) {
                            Some(text) if !text.trim().is_empty() => Ok(text.to_string()),
                            _ => Err(OracleError::EmptyCompletion),
                        };
                    }
                    let text = resp.text().unwrap_or_default();
                    if status.as_u16() != 429 && !status.is_server_error() {
                        return Err(OracleError::Status {
                            status: status.as_u16(),
                            body: text,
                        });
                    }
                    if attempts > self.config.max_retries {
                        return Err(OracleError::Status {
                            status: status.as_u16(),
                            body: text,
                        });
                    }
                    format!("status {status}")
                }
                Err(e) => {
                    if attempts > self.config.max_retries {
                        return Err(OracleError::Transport {
                            attempts,
                            message: e.to_string(),
                        });
                    }
                    e.to_string()
                }
            };
            let delay = self.config.backoff_ms.saturating_mul(1 << (attempts - 1).min(16));
            log::warn!("oracle request attempt {attempts} failed ({retry_reason}); retrying in {delay} ms");
            std::thread::sleep(Duration::from_millis(delay));
        }
    }
}
