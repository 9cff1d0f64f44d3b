//! Client for remote OpenAI-compatible text completion endpoints.
//!
//! Remote models only return finished text, so none of the local sampling
//! transforms run here: the hyperparameters are forwarded as request fields
//! and the remote side does the sampling.

use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::params::SamplingParams;

/// Environment variable holding the bearer token for the remote endpoint.
pub const API_KEY_ENV: &str = "PARAMSCOPE_API_KEY";

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(60);

#[derive(Debug, Error)]
pub enum RemoteError {
    #[error("invalid remote configuration: {0}")]
    InvalidConfig(String),
    #[error("remote request timed out")]
    Timeout,
    #[error("remote returned HTTP {status}: {body}")]
    Http { status: u16, body: String },
    #[error("malformed remote response: {0}")]
    MalformedResponse(String),
    #[error("transport error: {0}")]
    Transport(String),
}

/// Connection settings for a remote completion endpoint.
///
/// `base_url` is the API root including any version prefix, e.g.
/// `https://api.example.com/v1`; requests go to `{base_url}/completions`.
#[derive(Clone)]
pub struct RemoteProviderConfig {
    base_url: reqwest::Url,
    api_key: Option<String>,
    model_name: String,
    timeout: Duration,
}

impl std::fmt::Debug for RemoteProviderConfig {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RemoteProviderConfig")
            .field("base_url", &self.base_url.as_str())
            .field("api_key", &self.api_key.as_ref().map(|_| "<redacted>"))
            .field("model_name", &self.model_name)
            .field("timeout", &self.timeout)
            .finish()
    }
}

impl RemoteProviderConfig {
    pub fn new(
        base_url: &str,
        api_key: Option<String>,
        model_name: impl Into<String>,
        timeout: Duration,
    ) -> Result<Self, RemoteError> {
        let base_url = reqwest::Url::parse(base_url)
            .map_err(|e| RemoteError::InvalidConfig(format!("base_url {base_url:?}: {e}")))?;
        if !matches!(base_url.scheme(), "http" | "https") {
            return Err(RemoteError::InvalidConfig(format!(
                "base_url scheme must be http or https, got {}",
                base_url.scheme()
            )));
        }
        if timeout.is_zero() {
            return Err(RemoteError::InvalidConfig("timeout must be positive".into()));
        }
        Ok(Self {
            base_url,
            api_key,
            model_name: model_name.into(),
            timeout,
        })
    }

    /// Reads the API key from [`API_KEY_ENV`], if set.
    pub fn api_key_from_env() -> Option<String> {
        std::env::var(API_KEY_ENV).ok().filter(|k| !k.is_empty())
    }

    pub fn model_name(&self) -> &str {
        &self.model_name
    }

    pub fn endpoint(&self) -> String {
        format!("{}/completions", self.base_url.as_str().trim_end_matches('/'))
    }
}

/// Request body sent to `/completions`.
#[derive(Debug, Serialize)]
pub struct CompletionRequest<'a> {
    pub model: &'a str,
    pub prompt: &'a str,
    pub top_p: f64,
    pub frequency_penalty: f64,
    pub presence_penalty: f64,
    pub max_tokens: usize,
}

impl<'a> CompletionRequest<'a> {
    pub fn new(
        model: &'a str,
        prompt: &'a str,
        params: &SamplingParams,
        max_tokens: usize,
    ) -> Self {
        Self {
            model,
            prompt,
            top_p: params.top_p(),
            frequency_penalty: params.frequency_penalty(),
            presence_penalty: params.presence_penalty(),
            max_tokens,
        }
    }
}

#[derive(Debug, Deserialize)]
struct CompletionResponse {
    choices: Vec<CompletionChoice>,
}

#[derive(Debug, Deserialize)]
struct CompletionChoice {
    text: String,
}

#[derive(Debug, Clone)]
pub struct RemoteCompletion {
    pub text: String,
    pub raw_response: serde_json::Value,
}

/// Issues one completion request per call. Failures are returned as-is with
/// no retry.
#[derive(Debug, Clone)]
pub struct RemoteClient {
    config: RemoteProviderConfig,
    http: reqwest::Client,
}

impl RemoteClient {
    pub fn new(config: RemoteProviderConfig) -> Result<Self, RemoteError> {
        let http = reqwest::Client::builder()
            .timeout(config.timeout)
            .build()
            .map_err(|e| RemoteError::InvalidConfig(e.to_string()))?;
        Ok(Self { config, http })
    }

    pub fn config(&self) -> &RemoteProviderConfig {
        &self.config
    }

    pub async fn complete(
        &self,
        prompt: &str,
        params: &SamplingParams,
        max_tokens: usize,
    ) -> Result<RemoteCompletion, RemoteError> {
        let body = CompletionRequest::new(&self.config.model_name, prompt, params, max_tokens);
        let mut request = self.http.post(self.config.endpoint()).json(&body);
        if let Some(key) = &self.config.api_key {
            request = request.bearer_auth(key);
        }

        let response = request.send().await.map_err(classify)?;
        let status = response.status();
        let bytes = response.bytes().await.map_err(classify)?;
        if !status.is_success() {
            return Err(RemoteError::Http {
                status: status.as_u16(),
                body: String::from_utf8_lossy(&bytes).into_owned(),
            });
        }

        let raw_response: serde_json::Value = serde_json::from_slice(&bytes)
            .map_err(|e| RemoteError::MalformedResponse(e.to_string()))?;
        let parsed: CompletionResponse = serde_json::from_value(raw_response.clone())
            .map_err(|e| RemoteError::MalformedResponse(e.to_string()))?;
        let text = parsed
            .choices
            .into_iter()
            .next()
            .map(|c| c.text)
            .ok_or_else(|| RemoteError::MalformedResponse("no choices in response".into()))?;
        Ok(RemoteCompletion { text, raw_response })
    }
}

fn classify(err: reqwest::Error) -> RemoteError {
    if err.is_timeout() {
        RemoteError::Timeout
    } else {
        RemoteError::Transport(err.to_string())
    }
}
