//! Chat-completion gateway with a content-addressed disk cache.
//!
//! Every request is keyed by a hash of its prompt, temperature, sample count
//! and backend id. A live backend fills the cache on a miss; the replay
//! backend serves only from the cache and never touches the network, which
//! makes a whole pipeline run a pure function of its inputs.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Condvar, Mutex};
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::problem::sha256_hex;

pub const ENDPOINT_ENV: &str = "CPVERIFY_LLM_ENDPOINT";
pub const API_KEY_ENV: &str = "CPVERIFY_LLM_API_KEY";

#[derive(Debug, Error)]
pub enum LlmError {
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("replay cache has no entry for key {key} (tag '{tag}')")]
    ReplayMiss { key: String, tag: String },
    #[error("transport failure after {attempts} attempts: {message}")]
    Transport { attempts: u32, message: String },
    #[error("backend returned {got} completions, expected {expected}")]
    CompletionCount { expected: usize, got: usize },
    #[error("cache I/O error at {path}: {source}")]
    Cache {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("corrupt cache entry {path}: {message}")]
    CorruptCache { path: PathBuf, message: String },
    #[error("missing environment variable {0}")]
    MissingEnv(&'static str),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub prompt: String,
    pub temperature: f64,
    pub max_tokens: u32,
    pub n_samples: u32,
    /// Pipeline stage name; partitions the cache directory.
    pub request_tag: String,
}

impl ChatRequest {
    pub fn new(prompt: impl Into<String>, request_tag: impl Into<String>) -> Self {
        Self {
            prompt: prompt.into(),
            temperature: 0.6,
            max_tokens: 8192,
            n_samples: 1,
            request_tag: request_tag.into(),
        }
    }

    pub fn samples(mut self, n: u32) -> Self {
        self.n_samples = n;
        self
    }

    pub fn temperature(mut self, t: f64) -> Self {
        self.temperature = t;
        self
    }

    pub fn validate(&self) -> Result<(), LlmError> {
        if self.prompt.is_empty() {
            return Err(LlmError::InvalidRequest("prompt is empty".into()));
        }
        if self.n_samples == 0 {
            return Err(LlmError::InvalidRequest("n_samples must be at least 1".into()));
        }
        if self.max_tokens == 0 {
            return Err(LlmError::InvalidRequest("max_tokens must be positive".into()));
        }
        if !(0.0..=2.0).contains(&self.temperature) {
            return Err(LlmError::InvalidRequest(format!("temperature {} outside [0, 2]", self.temperature)));
        }
        if self.request_tag.is_empty() || self.request_tag.contains(['/', '\\']) || self.request_tag.starts_with('.') {
            return Err(LlmError::InvalidRequest(format!("bad request tag '{}'", self.request_tag)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatResponse {
    pub completions: Vec<String>,
    pub backend_id: String,
    pub cached: bool,
}

/// An OpenAI-style `/chat/completions` endpoint.
#[derive(Debug, Clone)]
pub struct LiveBackend {
    pub endpoint: String,
    pub api_key: Option<String>,
    pub model: String,
    pub request_timeout: Duration,
}

impl LiveBackend {
    /// Endpoint from `CPVERIFY_LLM_ENDPOINT`, credential from
    /// `CPVERIFY_LLM_API_KEY` (optional for local servers).
    pub fn from_env(model: impl Into<String>) -> Result<Self, LlmError> {
        let endpoint = std::env::var(ENDPOINT_ENV).map_err(|_| LlmError::MissingEnv(ENDPOINT_ENV))?;
        Ok(Self {
            endpoint,
            api_key: std::env::var(API_KEY_ENV).ok(),
            model: model.into(),
            request_timeout: Duration::from_secs(600),
        })
    }

    fn call_once(&self, req: &ChatRequest, n: u32) -> Result<Vec<String>, String> {
        let body = json!({
            "model": self.model,
            "messages": [{"role": "user", "content": req.prompt}],
            "temperature": req.temperature,
            "max_tokens": req.max_tokens,
            "n": n,
        });
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(self.request_timeout))
            .build()
            .into();
        let mut request = agent.post(&self.endpoint).header("Content-Type", "application/json");
        if let Some(key) = &self.api_key {
            request = request.header("Authorization", &format!("Bearer {key}"));
        }
        let mut response = request.send(body.to_string()).map_err(|e| e.to_string())?;
        let text = response.body_mut().read_to_string().map_err(|e| e.to_string())?;
        let value: Value = serde_json::from_str(&text).map_err(|e| format!("bad response JSON: {e}"))?;
        let choices = value
            .get("choices")
            .and_then(Value::as_array)
            .ok_or_else(|| "response has no 'choices' array".to_string())?;
        choices
            .iter()
            .map(|c| {
                c.pointer("/message/content")
                    .and_then(Value::as_str)
                    .map(str::to_string)
                    .ok_or_else(|| "choice without message content".to_string())
            })
            .collect()
    }
}

#[derive(Debug, Clone)]
pub enum Backend {
    Live(LiveBackend),
    /// Serves recorded completions keyed under `backend_id`.
    Replay { backend_id: String },
}

impl Backend {
    pub fn id(&self) -> &str {
        match self {
            Backend::Live(b) => &b.model,
            Backend::Replay { backend_id } => backend_id,
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct CacheEntry {
    key: String,
    backend_id: String,
    prompt: String,
    temperature: f64,
    n_samples: u32,
    completions: Vec<String>,
}

struct InFlight {
    limit: usize,
    active: Mutex<usize>,
    freed: Condvar,
}

impl InFlight {
    fn acquire(&self) -> InFlightGuard<'_> {
        let mut active = self.active.lock().expect("in-flight counter poisoned");
        while *active >= self.limit {
            active = self.freed.wait(active).expect("in-flight counter poisoned");
        }
        *active += 1;
        InFlightGuard(self)
    }
}

struct InFlightGuard<'a>(&'a InFlight);

impl Drop for InFlightGuard<'_> {
    fn drop(&mut self) {
        *self.0.active.lock().expect("in-flight counter poisoned") -= 1;
        self.0.freed.notify_one();
    }
}

pub struct Gateway {
    backend: Backend,
    cache_dir: PathBuf,
    retries: u32,
    base_backoff: Duration,
    in_flight: InFlight,
}

impl std::fmt::Debug for Gateway {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Gateway")
            .field("backend", &self.backend)
            .field("cache_dir", &self.cache_dir)
            .finish()
    }
}

impl Gateway {
    pub fn new(backend: Backend, cache_dir: impl Into<PathBuf>) -> Self {
        Self {
            backend,
            cache_dir: cache_dir.into(),
            retries: 3,
            base_backoff: Duration::from_millis(500),
            in_flight: InFlight {
                limit: 8,
                active: Mutex::new(0),
                freed: Condvar::new(),
            },
        }
    }

    pub fn replay(dir: impl Into<PathBuf>, backend_id: impl Into<String>) -> Self {
        Self::new(
            Backend::Replay {
                backend_id: backend_id.into(),
            },
            dir,
        )
    }

    pub fn with_retries(mut self, retries: u32, base_backoff: Duration) -> Self {
        self.retries = retries;
        self.base_backoff = base_backoff;
        self
    }

    pub fn with_in_flight_limit(mut self, limit: usize) -> Self {
        self.in_flight.limit = limit.max(1);
        self
    }

    pub fn backend(&self) -> &Backend {
        &self.backend
    }

    pub fn cache_dir(&self) -> &Path {
        &self.cache_dir
    }

    pub fn cache_key(&self, req: &ChatRequest) -> String {
        cache_key(req, self.backend.id())
    }

    fn entry_path(&self, req: &ChatRequest, key: &str) -> PathBuf {
        self.cache_dir.join(&req.request_tag).join(format!("{key}.json"))
    }

    pub fn complete(&self, req: &ChatRequest) -> Result<ChatResponse, LlmError> {
        req.validate()?;
        let key = self.cache_key(req);
        let path = self.entry_path(req, &key);
        if let Some(completions) = read_entry(&path, req.n_samples as usize)? {
            return Ok(ChatResponse {
                completions,
                backend_id: self.backend.id().to_string(),
                cached: true,
            });
        }
        let live = match &self.backend {
            Backend::Replay { .. } => {
                return Err(LlmError::ReplayMiss {
                    key,
                    tag: req.request_tag.clone(),
                })
            }
            Backend::Live(live) => live,
        };
        let completions = {
            let _slot = self.in_flight.acquire();
            self.fetch_with_retries(live, req)?
        };
        self.store(req, &completions)?;
        Ok(ChatResponse {
            completions,
            backend_id: self.backend.id().to_string(),
            cached: false,
        })
    }

    fn fetch_with_retries(&self, live: &LiveBackend, req: &ChatRequest) -> Result<Vec<String>, LlmError> {
        let wanted = req.n_samples as usize;
        let mut completions: Vec<String> = Vec::with_capacity(wanted);
        let mut failures = 0u32;
        // endpoints that cap `n` return fewer choices; top up with more calls
        let mut rounds = 0usize;
        while completions.len() < wanted {
            rounds += 1;
            if rounds > wanted + self.retries as usize + 1 {
                return Err(LlmError::CompletionCount {
                    expected: wanted,
                    got: completions.len(),
                });
            }
            match live.call_once(req, (wanted - completions.len()) as u32) {
                Ok(batch) => completions.extend(batch),
                Err(message) => {
                    failures += 1;
                    if failures > self.retries {
                        return Err(LlmError::Transport {
                            attempts: failures,
                            message,
                        });
                    }
                    let backoff = self.base_backoff * 2u32.pow(failures - 1);
                    log::warn!("LLM request failed ({message}); retrying in {backoff:?}");
                    thread::sleep(backoff);
                }
            }
        }
        completions.truncate(wanted);
        Ok(completions)
    }

    /// Records completions for `req` (used for live misses and for seeding
    /// replay directories). Writes are atomic: temp file then rename.
    pub fn store(&self, req: &ChatRequest, completions: &[String]) -> Result<(), LlmError> {
        req.validate()?;
        if completions.len() != req.n_samples as usize {
            return Err(LlmError::CompletionCount {
                expected: req.n_samples as usize,
                got: completions.len(),
            });
        }
        let key = self.cache_key(req);
        let path = self.entry_path(req, &key);
        let dir = path.parent().expect("entry path has a parent");
        let io_err = |source| LlmError::Cache {
            path: path.clone(),
            source,
        };
        fs::create_dir_all(dir).map_err(io_err)?;
        let entry = CacheEntry {
            key,
            backend_id: self.backend.id().to_string(),
            prompt: req.prompt.clone(),
            temperature: req.temperature,
            n_samples: req.n_samples,
            completions: completions.to_vec(),
        };
        let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err)?;
        serde_json::to_writer_pretty(&mut tmp, &entry).expect("cache entry serializes");
        tmp.write_all(b"\n").map_err(io_err)?;
        tmp.persist(&path).map_err(|e| io_err(e.error))?;
        Ok(())
    }
}

pub fn cache_key(req: &ChatRequest, backend_id: &str) -> String {
    let material = format!(
        "{}\u{0}{:?}\u{0}{}\u{0}{}",
        req.prompt, req.temperature, req.n_samples, backend_id
    );
    sha256_hex(material.as_bytes())
}

fn read_entry(path: &Path, expected: usize) -> Result<Option<Vec<String>>, LlmError> {
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
        Err(source) => {
            return Err(LlmError::Cache {
                path: path.to_path_buf(),
                source,
            })
        }
    };
    let entry: CacheEntry = serde_json::from_str(&text).map_err(|e| LlmError::CorruptCache {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    if entry.completions.len() != expected {
        return Err(LlmError::CorruptCache {
            path: path.to_path_buf(),
            message: format!("{} completions stored, {expected} requested", entry.completions.len()),
        });
    }
    Ok(Some(entry.completions))
}

/// A fenced code block found in completion text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodeBlock {
    pub language: String,
    pub code: String,
    /// The fence was never closed; the block runs to the end of the text.
    pub unterminated: bool,
}

/// Fenced (```) code blocks in order of appearance.
pub fn extract_code_blocks(text: &str) -> Vec<CodeBlock> {
    let mut blocks = Vec::new();
    let mut open: Option<(usize, String, Vec<&str>)> = None;
    for line in text.lines() {
        let trimmed = line.trim_start();
        let ticks = trimmed.chars().take_while(|c| *c == '`').count();
        match &mut open {
            None if ticks >= 3 => {
                let language = trimmed[ticks..].trim().to_string();
                open = Some((ticks, language, Vec::new()));
            }
            None => {}
            Some((fence, _, _)) if ticks >= *fence && trimmed[ticks..].trim().is_empty() => {
                let (_, language, lines) = open.take().expect("open block");
                blocks.push(CodeBlock {
                    language,
                    code: join_lines(&lines),
                    unterminated: false,
                });
            }
            Some((_, _, lines)) => lines.push(line),
        }
    }
    if let Some((_, language, lines)) = open {
        blocks.push(CodeBlock {
            language,
            code: join_lines(&lines),
            unterminated: true,
        });
    }
    blocks
}

fn join_lines(lines: &[&str]) -> String {
    let mut s = lines.join("\n");
    if !lines.is_empty() {
        s.push('\n');
    }
    s
}
