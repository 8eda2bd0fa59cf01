use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::{Arc, Condvar, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::{CacheKey, ChatRequest, ChatResponse, LlmError, Provider, ResponseCache};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CacheMode {
    /// Serve hits from the cache; call the provider and store on a miss.
    #[default]
    Record,
    /// Serve only from the cache; a miss is an error.
    Replay,
}

impl std::str::FromStr for CacheMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "record" => Ok(CacheMode::Record),
            "replay" => Ok(CacheMode::Replay),
            other => Err(format!("unknown cache mode `{other}` (expected record or replay)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClientConfig {
    pub mode: CacheMode,
    pub cache_dir: Option<PathBuf>,
    pub max_concurrent: usize,
    pub min_delay: Duration,
}

impl Default for ClientConfig {
    fn default() -> Self {
        ClientConfig {
            mode: CacheMode::Record,
            cache_dir: None,
            max_concurrent: 4,
            min_delay: Duration::ZERO,
        }
    }
}

struct Limiter {
    state: Mutex<(usize, Option<Instant>)>,
    freed: Condvar,
    max_concurrent: usize,
    min_delay: Duration,
}

struct Permit<'a>(&'a Limiter);

impl Limiter {
    fn acquire(&self) -> Permit<'_> {
        let mut state = self.state.lock().unwrap();
        while state.0 >= self.max_concurrent {
            state = self.freed.wait(state).unwrap();
        }
        state.0 += 1;
        // Reserve the next start slot while holding the lock, then wait.
        let now = Instant::now();
        let start = match state.1 {
            Some(last) if last + self.min_delay > now => last + self.min_delay,
            _ => now,
        };
        state.1 = Some(start);
        drop(state);
        if start > now {
            thread::sleep(start - now);
        }
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        self.0.state.lock().unwrap().0 -= 1;
        self.0.freed.notify_one();
    }
}

/// Chat client combining a provider, the response cache and rate limiting.
/// Safe to share across threads.
pub struct LlmClient {
    provider: Option<Arc<dyn Provider>>,
    cache: Option<ResponseCache>,
    mode: CacheMode,
    limiter: Limiter,
    key_locks: Mutex<HashMap<CacheKey, Arc<Mutex<()>>>>,
}

impl LlmClient {
    pub fn new(provider: Option<Arc<dyn Provider>>, config: ClientConfig) -> Self {
        LlmClient {
            provider,
            cache: config.cache_dir.map(ResponseCache::new),
            mode: config.mode,
            limiter: Limiter {
                state: Mutex::new((0, None)),
                freed: Condvar::new(),
                max_concurrent: config.max_concurrent.max(1),
                min_delay: config.min_delay,
            },
            key_locks: Mutex::new(HashMap::new()),
        }
    }

    /// No cache: every request goes to the provider.
    pub fn direct(provider: impl Provider + 'static) -> Self {
        Self::new(Some(Arc::new(provider)), ClientConfig::default())
    }

    pub fn mode(&self) -> CacheMode {
        self.mode
    }

    pub fn max_concurrent(&self) -> usize {
        self.limiter.max_concurrent
    }

    pub fn cache(&self) -> Option<&ResponseCache> {
        self.cache.as_ref()
    }

    pub fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, LlmError> {
        request.validate()?;
        let key = CacheKey::for_request(request);
        let Some(cache) = &self.cache else {
            if self.mode == CacheMode::Replay {
                return Err(LlmError::CacheMiss { digest: key.digest });
            }
            return self.call_provider(request);
        };

        // Concurrent identical requests wait for the first one's entry.
        let key_lock = self.key_locks.lock().unwrap().entry(key.clone()).or_default().clone();
        let _guard = key_lock.lock().unwrap();
        if let Some(entry) = cache.get(&key)? {
            return Ok(ChatResponse {
                retrieved_from_cache: true,
                ..entry.response
            });
        }
        if self.mode == CacheMode::Replay {
            return Err(LlmError::CacheMiss { digest: key.digest });
        }
        let response = self.call_provider(request)?;
        cache.put(request, &response)?;
        Ok(response)
    }

    fn call_provider(&self, request: &ChatRequest) -> Result<ChatResponse, LlmError> {
        let provider = self.provider.as_ref().ok_or(LlmError::NoProvider)?;
        let _permit = self.limiter.acquire();
        let completion = provider.complete(request)?;
        Ok(ChatResponse {
            text: completion.text,
            input_token_count: completion.input_token_count,
            output_token_count: completion.output_token_count,
            provider_name: provider.name().to_string(),
            retrieved_from_cache: false,
        })
    }
}
