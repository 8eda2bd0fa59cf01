//! Provider-agnostic chat completion with a content-addressed record/replay
//! cache, so that every experiment can be rerun offline.

mod cache;
mod client;
mod http;
mod stub;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub(crate) use cache::now_unix;
pub use cache::{CacheEntry, CacheSummary, ResponseCache};
pub use client::{CacheMode, ClientConfig, LlmClient};
pub use http::{HttpConfig, HttpProvider, Transport, UreqTransport};
pub use stub::{stub_provider, FnProvider, Pattern, StubProvider, StubRule};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model_id: String,
    #[serde(default)]
    pub temperature: f64,
    pub prompt_text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_output_tokens: Option<u32>,
}

impl ChatRequest {
    /// Temperature 0, no output limit.
    pub fn new(model_id: impl Into<String>, prompt_text: impl Into<String>) -> Self {
        ChatRequest {
            model_id: model_id.into(),
            temperature: 0.0,
            prompt_text: prompt_text.into(),
            max_output_tokens: None,
        }
    }

    pub fn validate(&self) -> Result<(), LlmError> {
        if !(self.temperature >= 0.0 && self.temperature.is_finite()) {
            return Err(LlmError::InvalidRequest(format!(
                "temperature must be a finite number >= 0, got {}",
                self.temperature
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatResponse {
    pub text: String,
    pub input_token_count: u64,
    pub output_token_count: u64,
    pub provider_name: String,
    pub retrieved_from_cache: bool,
}

/// What a provider returns for one request.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Completion {
    pub text: String,
    pub input_token_count: u64,
    pub output_token_count: u64,
}

pub trait Provider: Send + Sync {
    fn name(&self) -> &str;
    fn complete(&self, request: &ChatRequest) -> Result<Completion, LlmError>;
}

/// Hex SHA-256 over model id, temperature and prompt text.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CacheKey {
    pub digest: String,
}

impl CacheKey {
    pub fn for_request(request: &ChatRequest) -> Self {
        let mut hasher = Sha256::new();
        for part in [
            request.model_id.as_bytes(),
            // `{:?}` keeps 0.0 and 0.5 distinct and is stable across runs.
            format!("{:?}", request.temperature).as_bytes(),
            request.prompt_text.as_bytes(),
        ] {
            hasher.update((part.len() as u64).to_le_bytes());
            hasher.update(part);
        }
        CacheKey {
            digest: hex::encode(hasher.finalize()),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum LlmError {
    #[error("cache miss for {digest} in replay mode")]
    CacheMiss { digest: String },
    #[error("no provider configured for record mode")]
    NoProvider,
    #[error("provider returned HTTP {status}: {message}")]
    Http { status: u16, message: String },
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("malformed provider payload: {0}")]
    MalformedPayload(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("cache {path}: {message}")]
    Cache { path: String, message: String },
}

/// Whitespace-separated word count, used where a provider reports no usage.
pub fn approximate_tokens(text: &str) -> u64 {
    text.split_whitespace().count() as u64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn key_is_fixed_length_hex_and_sensitive_to_every_field() {
        let base = ChatRequest::new("m", "p");
        let key = CacheKey::for_request(&base);
        assert_eq!(key.digest.len(), 64);
        assert!(key.digest.chars().all(|c| c.is_ascii_hexdigit()));
        assert_eq!(key, CacheKey::for_request(&base.clone()));

        let mut other = base.clone();
        other.temperature = 0.5;
        assert_ne!(key, CacheKey::for_request(&other));
        assert_ne!(key, CacheKey::for_request(&ChatRequest::new("m2", "p")));
        assert_ne!(key, CacheKey::for_request(&ChatRequest::new("m", "p2")));
        // Field boundaries matter.
        assert_ne!(
            CacheKey::for_request(&ChatRequest::new("ab", "c")),
            CacheKey::for_request(&ChatRequest::new("a", "bc"))
        );
    }

    #[test]
    fn negative_temperature_is_rejected() {
        let mut r = ChatRequest::new("m", "p");
        r.temperature = -0.1;
        assert!(r.validate().is_err());
    }
}
