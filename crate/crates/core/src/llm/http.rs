use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{approximate_tokens, ChatRequest, Completion, LlmError, Provider};

/// Connection settings for an OpenAI-compatible chat-completions endpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HttpConfig {
    /// Full URL including the path, e.g. `https://host/v1/chat/completions`.
    pub endpoint: String,
    #[serde(default, skip_serializing)]
    pub api_key: Option<String>,
    #[serde(default = "default_key_header")]
    pub key_header: String,
    /// Prepended to the key in the credential header.
    #[serde(default = "default_key_prefix")]
    pub key_prefix: String,
    #[serde(default = "default_attempts")]
    pub max_attempts: u32,
    #[serde(default = "default_backoff_ms")]
    pub initial_backoff_ms: u64,
    #[serde(default = "default_timeout_secs")]
    pub timeout_secs: u64,
}

fn default_key_header() -> String {
    "Authorization".into()
}
fn default_key_prefix() -> String {
    "Bearer ".into()
}
fn default_attempts() -> u32 {
    3
}
fn default_backoff_ms() -> u64 {
    1000
}
fn default_timeout_secs() -> u64 {
    120
}

impl HttpConfig {
    pub fn new(endpoint: impl Into<String>, api_key: Option<String>) -> Self {
        HttpConfig {
            endpoint: endpoint.into(),
            api_key,
            key_header: default_key_header(),
            key_prefix: default_key_prefix(),
            max_attempts: default_attempts(),
            initial_backoff_ms: default_backoff_ms(),
            timeout_secs: default_timeout_secs(),
        }
    }
}

/// Sends one JSON POST and returns status and body. Errors are failures to
/// get any HTTP response at all.
pub trait Transport: Send + Sync {
    fn post_json(&self, url: &str, headers: &[(String, String)], body: &str) -> Result<(u16, String), String>;
}

pub struct UreqTransport {
    agent: ureq::Agent,
}

impl UreqTransport {
    pub fn new(timeout: Duration) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        UreqTransport { agent }
    }
}

impl Transport for UreqTransport {
    fn post_json(&self, url: &str, headers: &[(String, String)], body: &str) -> Result<(u16, String), String> {
        let mut request = self.agent.post(url).header("Content-Type", "application/json");
        for (name, value) in headers {
            request = request.header(name.as_str(), value.as_str());
        }
        let mut response = request.send(body).map_err(|e| e.to_string())?;
        let status = response.status().as_u16();
        let text = response.body_mut().read_to_string().map_err(|e| e.to_string())?;
        Ok((status, text))
    }
}

pub struct HttpProvider<T = UreqTransport> {
    config: HttpConfig,
    transport: T,
}

impl HttpProvider<UreqTransport> {
    pub fn new(config: HttpConfig) -> Self {
        let transport = UreqTransport::new(Duration::from_secs(config.timeout_secs));
        HttpProvider { config, transport }
    }
}

impl<T: Transport> HttpProvider<T> {
    pub fn with_transport(config: HttpConfig, transport: T) -> Self {
        HttpProvider { config, transport }
    }

    fn body(request: &ChatRequest) -> String {
        let mut body = json!({
            "model": request.model_id,
            "temperature": request.temperature,
            "messages": [{"role": "user", "content": request.prompt_text}],
        });
        if let Some(max) = request.max_output_tokens {
            body["max_tokens"] = json!(max);
        }
        body.to_string()
    }

    fn headers(&self) -> Vec<(String, String)> {
        match &self.config.api_key {
            Some(key) => vec![(
                self.config.key_header.clone(),
                format!("{}{key}", self.config.key_prefix),
            )],
            None => Vec::new(),
        }
    }
}

fn is_transient(status: u16) -> bool {
    status == 408 || status == 429 || status >= 500
}

fn decode(request: &ChatRequest, payload: &str) -> Result<Completion, LlmError> {
    let value: Value = serde_json::from_str(payload).map_err(|e| LlmError::MalformedPayload(e.to_string()))?;
    let text = value
        .pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .ok_or_else(|| LlmError::MalformedPayload("missing choices[0].message.content".into()))?
        .to_string();
    let usage = |field: &str| value.pointer(&format!("/usage/{field}")).and_then(Value::as_u64);
    Ok(Completion {
        input_token_count: usage("prompt_tokens").unwrap_or_else(|| approximate_tokens(&request.prompt_text)),
        output_token_count: usage("completion_tokens").unwrap_or_else(|| approximate_tokens(&text)),
        text,
    })
}

impl<T: Transport> Provider for HttpProvider<T> {
    fn name(&self) -> &str {
        "http"
    }

    fn complete(&self, request: &ChatRequest) -> Result<Completion, LlmError> {
        let body = Self::body(request);
        let headers = self.headers();
        let attempts = self.config.max_attempts.max(1);
        let mut backoff = Duration::from_millis(self.config.initial_backoff_ms);
        let mut last_error = None;
        for attempt in 1..=attempts {
            let error = match self.transport.post_json(&self.config.endpoint, &headers, &body) {
                Ok((status, payload)) if (200..300).contains(&status) => return decode(request, &payload),
                Ok((status, payload)) => {
                    let error = LlmError::Http {
                        status,
                        message: payload.chars().take(200).collect(),
                    };
                    if !is_transient(status) {
                        return Err(error);
                    }
                    error
                }
                Err(message) => LlmError::Transport(message),
            };
            last_error = Some(error);
            if attempt < attempts {
                thread::sleep(backoff);
                backoff *= 2;
            }
        }
        Err(last_error.expect("at least one attempt"))
    }
}
