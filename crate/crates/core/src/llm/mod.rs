//! Batch translation through a text-generation endpoint.
//!
//! Requests go out with bounded concurrency and are retried with exponential
//! backoff on transient failures. Completions are cached in an append-only
//! file keyed by `sha256(prompt, generation params, model id)`, so a rerun of
//! the same batch sends nothing over the network.
//!
//! # Wire schemas
//!
//! `native` (default) posts
//! `{"prompt", "max_new_tokens", "temperature", "beam_size", "no_repeat_ngram_size"}`
//! and expects `{"text": "..."}` back. `tgi` speaks the Hugging Face
//! text-generation-inference shape (`inputs` + `parameters`, answer in
//! `generated_text`). `openai` speaks the legacy completions API
//! (`choices[0].text`), which has no beam or n-gram controls.

pub mod mock;

use std::collections::HashMap;
use std::fmt;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::io::sha256_hex;
use crate::prompt::{parse_completion, GenerationParams};

#[derive(Debug, Error)]
pub enum LlmError {
    #[error("authentication failed: {0}")]
    Auth(String),
    #[error("invalid endpoint configuration: {0}")]
    Config(String),
    #[error("cache error: {0}")]
    Cache(#[from] std::io::Error),
}

/// Outcome of a single request attempt.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BackendError {
    /// Worth retrying: connection problems, timeouts, 429 and 5xx.
    Transient(String),
    /// Retrying will not help: other 4xx, malformed responses.
    Permanent(String),
    /// Credentials rejected; aborts the whole batch.
    Auth(String),
}

impl fmt::Display for BackendError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BackendError::Transient(m) => write!(f, "transient failure: {m}"),
            BackendError::Permanent(m) => write!(f, "permanent failure: {m}"),
            BackendError::Auth(m) => write!(f, "authentication failure: {m}"),
        }
    }
}

/// Anything that turns a prompt into raw completion text.
pub trait CompletionBackend: Sync {
    fn model_id(&self) -> &str;
    fn complete(&self, prompt: &str, params: &GenerationParams) -> Result<String, BackendError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum WireSchema {
    #[default]
    Native,
    Tgi,
    Openai,
}

impl FromStr for WireSchema {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "native" => Ok(WireSchema::Native),
            "tgi" => Ok(WireSchema::Tgi),
            "openai" => Ok(WireSchema::Openai),
            other => Err(format!(
                "unknown wire schema {other:?} (expected native, tgi or openai)"
            )),
        }
    }
}

impl WireSchema {
    pub fn request_body(self, prompt: &str, model: &str, p: &GenerationParams) -> Value {
        match self {
            WireSchema::Native => json!({
                "prompt": prompt,
                "max_new_tokens": p.max_new_tokens,
                "temperature": p.temperature,
                "beam_size": p.beam_size,
                "no_repeat_ngram_size": p.no_repeat_ngram,
            }),
            WireSchema::Tgi => json!({
                "inputs": prompt,
                "parameters": {
                    "max_new_tokens": p.max_new_tokens,
                    "temperature": p.temperature,
                    "num_beams": p.beam_size,
                    "no_repeat_ngram_size": p.no_repeat_ngram,
                    "do_sample": false,
                    "return_full_text": false,
                },
            }),
            WireSchema::Openai => json!({
                "model": model,
                "prompt": prompt,
                "max_tokens": p.max_new_tokens,
                "temperature": p.temperature,
                "n": 1,
            }),
        }
    }

    pub fn extract_text(self, body: &Value) -> Option<String> {
        let text = match self {
            WireSchema::Native => body.get("text"),
            WireSchema::Tgi => body
                .get("generated_text")
                .or_else(|| body.get(0).and_then(|first| first.get("generated_text"))),
            WireSchema::Openai => body.pointer("/choices/0/text"),
        };
        text.and_then(Value::as_str).map(str::to_string)
    }
}

/// Concurrency and retry settings for a batch.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DispatchConfig {
    pub max_in_flight: usize,
    /// Retries after the first attempt.
    pub retry_budget: u32,
    /// Delay before the first retry; doubles on each further retry.
    pub backoff: Duration,
}

impl Default for DispatchConfig {
    fn default() -> Self {
        DispatchConfig {
            max_in_flight: 4,
            retry_budget: 3,
            backoff: Duration::from_millis(500),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EndpointConfig {
    /// e.g. `http://localhost:8080`
    pub base_url: String,
    /// e.g. `/generate`
    pub path: String,
    pub schema: WireSchema,
    pub model: String,
    /// Name of the environment variable holding the bearer token. The token
    /// itself is never stored.
    pub token_env: Option<String>,
    pub timeout: Duration,
    pub dispatch: DispatchConfig,
}

impl EndpointConfig {
    pub fn validate(&self) -> Result<(), LlmError> {
        if self.timeout.is_zero() {
            return Err(LlmError::Config("timeout must be positive".into()));
        }
        if self.dispatch.max_in_flight == 0 {
            return Err(LlmError::Config(
                "max in-flight requests must be at least 1".into(),
            ));
        }
        if !(self.base_url.starts_with("http://") || self.base_url.starts_with("https://")) {
            return Err(LlmError::Config(format!(
                "base url {:?} is not http(s)",
                self.base_url
            )));
        }
        Ok(())
    }

    pub fn url(&self) -> String {
        let base = self.base_url.trim_end_matches('/');
        if self.path.is_empty() {
            base.to_string()
        } else {
            format!("{base}/{}", self.path.trim_start_matches('/'))
        }
    }
}

pub struct HttpBackend {
    config: EndpointConfig,
    token: Option<String>,
    agent: ureq::Agent,
}

impl HttpBackend {
    /// Validates the configuration and resolves the token. A configured but
    /// unset token variable is an authentication error, raised before any
    /// request is made.
    pub fn new(config: EndpointConfig) -> Result<Self, LlmError> {
        config.validate()?;
        let token = match &config.token_env {
            None => None,
            Some(var) => match std::env::var(var) {
                Ok(t) if !t.trim().is_empty() => Some(t),
                _ => {
                    return Err(LlmError::Auth(format!(
                        "environment variable {var} is not set"
                    )))
                }
            },
        };
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(config.timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Ok(HttpBackend {
            config,
            token,
            agent,
        })
    }
}

impl CompletionBackend for HttpBackend {
    fn model_id(&self) -> &str {
        &self.config.model
    }

    fn complete(&self, prompt: &str, params: &GenerationParams) -> Result<String, BackendError> {
        let body = self
            .config
            .schema
            .request_body(prompt, &self.config.model, params);
        let mut request = self.agent.post(self.config.url());
        if let Some(token) = &self.token {
            request = request.header("Authorization", format!("Bearer {token}"));
        }
        let mut response = request
            .send_json(&body)
            .map_err(|e| BackendError::Transient(e.to_string()))?;
        let status = response.status().as_u16();
        let text = response
            .body_mut()
            .read_to_string()
            .map_err(|e| BackendError::Transient(format!("reading response body: {e}")))?;
        match status {
            200..=299 => {}
            401 | 403 => return Err(BackendError::Auth(format!("HTTP {status}"))),
            408 | 429 | 500..=599 => return Err(BackendError::Transient(format!("HTTP {status}"))),
            _ => {
                return Err(BackendError::Permanent(format!(
                    "HTTP {status}: {}",
                    truncate(&text, 200)
                )))
            }
        }
        let json: Value = serde_json::from_str(&text)
            .map_err(|e| BackendError::Permanent(format!("malformed response: {e}")))?;
        self.config.schema.extract_text(&json).ok_or_else(|| {
            BackendError::Permanent(format!(
                "response has no completion text: {}",
                truncate(&text, 200)
            ))
        })
    }
}

fn truncate(s: &str, max: usize) -> &str {
    match s.char_indices().nth(max) {
        Some((i, _)) => &s[..i],
        None => s,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionRecord {
    pub prompt_hash: String,
    pub raw: String,
    /// `parse_completion(raw)`
    pub parsed: String,
    pub latency_ms: u64,
    pub model: String,
    pub params: GenerationParams,
    /// Set when the prompt could not be completed; `raw` is then empty.
    pub error: Option<String>,
}

fn params_digest(params: &GenerationParams) -> String {
    sha256_hex(
        serde_json::to_string(params)
            .expect("params serialize")
            .as_bytes(),
    )
}

/// Cache key for a (prompt, params, model) triple.
pub fn prompt_hash(prompt: &str, params: &GenerationParams, model: &str) -> String {
    let mut material = String::with_capacity(prompt.len() + 128);
    material.push_str(prompt);
    material.push('\u{0}');
    material.push_str(&serde_json::to_string(params).expect("params serialize"));
    material.push('\u{0}');
    material.push_str(model);
    sha256_hex(material.as_bytes())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct CacheLine {
    hash: String,
    params_digest: String,
    model: String,
    completion: String,
    latency_ms: u64,
}

/// Append-only completion cache. One JSON object per line:
/// `{"hash", "params_digest", "model", "completion", "latency_ms"}`.
pub struct CompletionCache {
    entries: Mutex<HashMap<String, CacheLine>>,
    writer: Option<Mutex<File>>,
    path: Option<PathBuf>,
}

impl CompletionCache {
    pub fn in_memory() -> Self {
        CompletionCache {
            entries: Mutex::new(HashMap::new()),
            writer: None,
            path: None,
        }
    }

    /// Opens (creating if needed) a cache file. Unreadable lines, such as a
    /// torn final write, are ignored.
    pub fn open(path: &Path) -> Result<Self, LlmError> {
        let mut entries = HashMap::new();
        if path.exists() {
            for line in BufReader::new(File::open(path)?).lines() {
                if let Ok(entry) = serde_json::from_str::<CacheLine>(&line?) {
                    entries.insert(entry.hash.clone(), entry);
                }
            }
        }
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(CompletionCache {
            entries: Mutex::new(entries),
            writer: Some(Mutex::new(file)),
            path: Some(path.to_path_buf()),
        })
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn len(&self) -> usize {
        self.entries.lock().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn get(&self, hash: &str) -> Option<CacheLine> {
        self.entries.lock().expect("cache lock").get(hash).cloned()
    }

    fn put(&self, entry: CacheLine) -> std::io::Result<()> {
        if let Some(writer) = &self.writer {
            let mut line = serde_json::to_string(&entry).expect("cache lines serialize");
            line.push('\n');
            let mut file = writer.lock().expect("cache writer lock");
            file.write_all(line.as_bytes())?;
            file.flush()?;
        }
        self.entries
            .lock()
            .expect("cache lock")
            .insert(entry.hash.clone(), entry);
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct BatchStats {
    pub prompts: usize,
    pub cache_hits: usize,
    /// Request attempts made, retries included.
    pub requests: usize,
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchResult {
    /// One record per input prompt, in input order.
    pub records: Vec<CompletionRecord>,
    pub stats: BatchStats,
}

fn record_from_cache(hash: &str, entry: &CacheLine, params: &GenerationParams) -> CompletionRecord {
    CompletionRecord {
        prompt_hash: hash.to_string(),
        parsed: parse_completion(&entry.completion),
        raw: entry.completion.clone(),
        latency_ms: entry.latency_ms,
        model: entry.model.clone(),
        params: params.clone(),
        error: None,
    }
}

/// Completes every prompt. Cached prompts are served locally; the rest are sent
/// with at most `dispatch.max_in_flight` concurrent requests, each retried up
/// to `dispatch.retry_budget` times on transient failures. A prompt that still
/// fails gets a record with `error` set; only an authentication failure aborts
/// the batch.
pub fn translate_batch(
    prompts: &[String],
    backend: &dyn CompletionBackend,
    params: &GenerationParams,
    cache: &CompletionCache,
    dispatch: &DispatchConfig,
) -> Result<BatchResult, LlmError> {
    let model = backend.model_id().to_string();
    let hashes: Vec<String> = prompts
        .iter()
        .map(|p| prompt_hash(p, params, &model))
        .collect();
    let mut stats = BatchStats {
        prompts: prompts.len(),
        ..Default::default()
    };

    // one request per distinct uncached prompt
    let mut pending: Vec<usize> = Vec::new();
    let mut first_of: HashMap<&str, usize> = HashMap::new();
    for (i, hash) in hashes.iter().enumerate() {
        if cache.get(hash).is_some() {
            stats.cache_hits += 1;
        } else if !first_of.contains_key(hash.as_str()) {
            first_of.insert(hash, i);
            pending.push(i);
        }
    }

    let results: Mutex<HashMap<usize, CompletionRecord>> = Mutex::new(HashMap::new());
    let next = AtomicUsize::new(0);
    let requests = AtomicUsize::new(0);
    let abort = AtomicBool::new(false);
    let auth_error: Mutex<Option<String>> = Mutex::new(None);
    let cache_error: Mutex<Option<std::io::Error>> = Mutex::new(None);
    let workers = dispatch.max_in_flight.max(1).min(pending.len());

    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                if abort.load(Ordering::SeqCst) {
                    return;
                }
                let slot = next.fetch_add(1, Ordering::SeqCst);
                let Some(&i) = pending.get(slot) else { return };
                let started = Instant::now();
                let mut attempt = 0u32;
                let outcome = loop {
                    requests.fetch_add(1, Ordering::SeqCst);
                    match backend.complete(&prompts[i], params) {
                        Ok(raw) => break Ok(raw),
                        Err(BackendError::Transient(msg)) if attempt < dispatch.retry_budget => {
                            log::warn!("prompt {i}: {msg}; retrying");
                            std::thread::sleep(
                                dispatch.backoff.saturating_mul(1u32 << attempt.min(16)),
                            );
                            attempt += 1;
                        }
                        Err(BackendError::Transient(msg)) => {
                            break Err(format!("gave up after {} attempts: {msg}", attempt + 1))
                        }
                        Err(BackendError::Permanent(msg)) => break Err(msg),
                        Err(BackendError::Auth(msg)) => {
                            abort.store(true, Ordering::SeqCst);
                            auth_error.lock().expect("auth lock").get_or_insert(msg);
                            return;
                        }
                    }
                };
                let latency_ms = started.elapsed().as_millis() as u64;
                let record = match outcome {
                    Ok(raw) => {
                        let entry = CacheLine {
                            hash: hashes[i].clone(),
                            params_digest: params_digest(params),
                            model: model.clone(),
                            completion: raw,
                            latency_ms,
                        };
                        let record = record_from_cache(&hashes[i], &entry, params);
                        if let Err(e) = cache.put(entry) {
                            cache_error
                                .lock()
                                .expect("cache error lock")
                                .get_or_insert(e);
                        }
                        record
                    }
                    Err(msg) => CompletionRecord {
                        prompt_hash: hashes[i].clone(),
                        raw: String::new(),
                        parsed: String::new(),
                        latency_ms,
                        model: model.clone(),
                        params: params.clone(),
                        error: Some(msg),
                    },
                };
                results.lock().expect("results lock").insert(i, record);
            });
        }
    });

    if let Some(msg) = auth_error.into_inner().expect("auth lock") {
        return Err(LlmError::Auth(msg));
    }
    if let Some(e) = cache_error.into_inner().expect("cache error lock") {
        return Err(LlmError::Cache(e));
    }
    stats.requests = requests.into_inner();

    let mut fresh = results.into_inner().expect("results lock");
    let mut records = Vec::with_capacity(prompts.len());
    for (i, hash) in hashes.iter().enumerate() {
        let record = match fresh.remove(&i) {
            Some(r) => r,
            None => match cache.get(hash) {
                Some(entry) => record_from_cache(hash, &entry, params),
                // duplicate of a prompt that failed
                None => {
                    let first = first_of[hash.as_str()];
                    records
                        .get(first)
                        .cloned()
                        .expect("first occurrence precedes duplicates")
                }
            },
        };
        if record.error.is_some() {
            stats.failures += 1;
        }
        records.push(record);
    }
    Ok(BatchResult { records, stats })
}
