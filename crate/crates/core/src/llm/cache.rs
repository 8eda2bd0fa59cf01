use std::fs;
use std::io::{ErrorKind, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use super::{CacheKey, ChatRequest, ChatResponse, LlmError};

/// One cached exchange, stored as `<digest>.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheEntry {
    pub key: CacheKey,
    pub request: ChatRequest,
    pub response: ChatResponse,
    /// Unix seconds.
    pub created_at: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CacheSummary {
    pub digest: String,
    pub model_id: String,
    pub created_at: u64,
    pub prompt_bytes: usize,
}

/// Directory of response files keyed by request digest.
#[derive(Debug, Clone)]
pub struct ResponseCache {
    dir: PathBuf,
}

/// Current time in unix seconds, or `SOURCE_DATE_EPOCH` when set.
pub(crate) fn now_unix() -> u64 {
    if let Some(epoch) = std::env::var("SOURCE_DATE_EPOCH").ok().and_then(|v| v.parse().ok()) {
        return epoch;
    }
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

impl ResponseCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        ResponseCache { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn path_for(&self, key: &CacheKey) -> PathBuf {
        self.dir.join(format!("{}.json", key.digest))
    }

    fn error(&self, path: &Path, message: impl ToString) -> LlmError {
        LlmError::Cache {
            path: path.display().to_string(),
            message: message.to_string(),
        }
    }

    pub fn get(&self, key: &CacheKey) -> Result<Option<CacheEntry>, LlmError> {
        let path = self.path_for(key);
        let text = match fs::read_to_string(&path) {
            Ok(text) => text,
            Err(e) if e.kind() == ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(self.error(&path, e)),
        };
        let entry: CacheEntry = serde_json::from_str(&text).map_err(|e| self.error(&path, e))?;
        if entry.key != *key {
            return Err(self.error(&path, "stored key does not match file name"));
        }
        Ok(Some(entry))
    }

    /// Writes atomically: readers see either no entry or the whole entry.
    pub fn put(&self, request: &ChatRequest, response: &ChatResponse) -> Result<CacheEntry, LlmError> {
        fs::create_dir_all(&self.dir).map_err(|e| self.error(&self.dir, e))?;
        let key = CacheKey::for_request(request);
        let entry = CacheEntry {
            key: key.clone(),
            request: request.clone(),
            response: ChatResponse {
                retrieved_from_cache: false,
                ..response.clone()
            },
            created_at: now_unix(),
        };
        let path = self.path_for(&key);
        let mut text = serde_json::to_string_pretty(&entry).map_err(|e| self.error(&path, e))?;
        text.push('\n');
        let mut tmp = tempfile::NamedTempFile::new_in(&self.dir).map_err(|e| self.error(&self.dir, e))?;
        tmp.write_all(text.as_bytes()).map_err(|e| self.error(&path, e))?;
        tmp.persist(&path).map_err(|e| self.error(&path, e.error))?;
        Ok(entry)
    }

    fn entry_paths(&self) -> Result<Vec<PathBuf>, LlmError> {
        let read = match fs::read_dir(&self.dir) {
            Ok(read) => read,
            Err(e) if e.kind() == ErrorKind::NotFound => return Ok(Vec::new()),
            Err(e) => return Err(self.error(&self.dir, e)),
        };
        let mut paths = Vec::new();
        for item in read {
            let path = item.map_err(|e| self.error(&self.dir, e))?.path();
            if path.extension().is_some_and(|x| x == "json") {
                paths.push(path);
            }
        }
        paths.sort();
        Ok(paths)
    }

    fn read_entry(&self, path: &Path) -> Result<CacheEntry, LlmError> {
        let text = fs::read_to_string(path).map_err(|e| self.error(path, e))?;
        serde_json::from_str(&text).map_err(|e| self.error(path, e))
    }

    pub fn list(&self) -> Result<Vec<CacheSummary>, LlmError> {
        self.entry_paths()?
            .iter()
            .map(|path| {
                let entry = self.read_entry(path)?;
                Ok(CacheSummary {
                    digest: entry.key.digest,
                    model_id: entry.request.model_id,
                    created_at: entry.created_at,
                    prompt_bytes: entry.request.prompt_text.len(),
                })
            })
            .collect()
    }

    /// Removes every entry, or only those created before `older_than` (unix
    /// seconds). Returns the number removed.
    pub fn purge(&self, older_than: Option<u64>) -> Result<usize, LlmError> {
        let mut removed = 0;
        for path in self.entry_paths()? {
            if let Some(threshold) = older_than {
                if self.read_entry(&path)?.created_at >= threshold {
                    continue;
                }
            }
            fs::remove_file(&path).map_err(|e| self.error(&path, e))?;
            removed += 1;
        }
        Ok(removed)
    }
}
