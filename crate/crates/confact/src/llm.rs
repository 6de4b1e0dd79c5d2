//! Uniform interface to chat-completion services.
//!
//! Four backends share one trait: a live OpenAI-compatible HTTP client, a
//! deterministic replay store for offline runs, a recorder that persists live
//! responses under canonical request digests, and a scripted backend for
//! tests and examples.

use std::collections::{HashMap, HashSet};
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Condvar, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Default cap on concurrently in-flight live requests.
pub const DEFAULT_MAX_PARALLEL: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

/// A chat-completion request. Temperature is 0 for all pipeline calls.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model_name: String,
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
    pub max_output_tokens: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FinishReason {
    Stop,
    /// Output hit the token limit; the text may be truncated and parse
    /// failures on it should be treated as length-induced.
    Length,
    Error,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TokenUsage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    pub total_tokens: u64,
}

impl TokenUsage {
    pub fn add(&mut self, other: &TokenUsage) {
        self.prompt_tokens += other.prompt_tokens;
        self.completion_tokens += other.completion_tokens;
        self.total_tokens += other.total_tokens;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatResponse {
    pub text: String,
    pub finish_reason: FinishReason,
    #[serde(default)]
    pub usage: Option<TokenUsage>,
}

impl ChatResponse {
    /// A plain completed response, as scripted backends produce.
    pub fn stop(text: impl Into<String>) -> Self {
        ChatResponse {
            text: text.into(),
            finish_reason: FinishReason::Stop,
            usage: None,
        }
    }
}

/// Model name and output budget shared by every call site.
#[derive(Debug, Clone)]
pub struct ChatOptions {
    pub model: String,
    pub max_output_tokens: u32,
}

impl Default for ChatOptions {
    fn default() -> Self {
        ChatOptions {
            model: "default".to_string(),
            max_output_tokens: 1024,
        }
    }
}

impl ChatOptions {
    /// Options used throughout the test suite and fixtures.
    pub fn test() -> Self {
        ChatOptions {
            model: "fixture-model".to_string(),
            max_output_tokens: 1024,
        }
    }
}

/// Hex digest of the canonical serialization of a request.
///
/// Canonical form is JSON with object keys sorted; message order, content
/// whitespace, model, temperature and token limit are all significant.
pub fn canonical_digest(request: &ChatRequest) -> String {
    let value = serde_json::to_value(request).expect("request serializes");
    let canonical = serde_json::to_string(&value).expect("value serializes");
    let mut hasher = Sha256::new();
    hasher.update(canonical.as_bytes());
    hex::encode(hasher.finalize())
}

/// A chat-completion service.
pub trait ChatBackend: Send + Sync {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse>;

    /// Declared context window in tokens, when known. Used by callers to
    /// truncate oversized prompts.
    fn context_window(&self) -> Option<usize> {
        None
    }
}

// ---------------------------------------------------------------------------
// Live HTTP backend
// ---------------------------------------------------------------------------

/// Connection settings for an OpenAI-compatible chat-completions endpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HttpConfig {
    /// Base URL (`https://host/v1`) or full `/chat/completions` URL.
    pub url: String,
    #[serde(default)]
    pub api_key: Option<String>,
    #[serde(default)]
    pub context_window: Option<usize>,
    #[serde(default)]
    pub max_parallel: Option<usize>,
}

/// Counting semaphore bounding in-flight requests.
struct Gate {
    permits: Mutex<usize>,
    cv: Condvar,
}

impl Gate {
    fn new(permits: usize) -> Self {
        Gate {
            permits: Mutex::new(permits.max(1)),
            cv: Condvar::new(),
        }
    }

    fn acquire(&self) {
        let mut permits = self.permits.lock().unwrap();
        while *permits == 0 {
            permits = self.cv.wait(permits).unwrap();
        }
        *permits -= 1;
    }

    fn release(&self) {
        *self.permits.lock().unwrap() += 1;
        self.cv.notify_one();
    }
}

/// Live client for an OpenAI-compatible `/chat/completions` endpoint.
pub struct HttpBackend {
    endpoint: String,
    api_key: Option<String>,
    client: reqwest::blocking::Client,
    gate: Gate,
    context_window: Option<usize>,
    max_attempts: usize,
}

#[derive(Serialize)]
struct WireRequest<'a> {
    model: &'a str,
    messages: &'a [ChatMessage],
    temperature: f64,
    max_tokens: u32,
}

#[derive(Deserialize)]
struct WireResponse {
    choices: Vec<WireChoice>,
    #[serde(default)]
    usage: Option<WireUsage>,
}

#[derive(Deserialize)]
struct WireChoice {
    message: WireMessage,
    #[serde(default)]
    finish_reason: Option<String>,
}

#[derive(Deserialize)]
struct WireMessage {
    #[serde(default)]
    content: Option<String>,
}

#[derive(Deserialize)]
struct WireUsage {
    #[serde(default)]
    prompt_tokens: u64,
    #[serde(default)]
    completion_tokens: u64,
    #[serde(default)]
    total_tokens: u64,
}

impl HttpBackend {
    pub fn new(config: &HttpConfig) -> Result<Self> {
        let endpoint = if config.url.ends_with("/chat/completions") {
            config.url.clone()
        } else {
            format!("{}/chat/completions", config.url.trim_end_matches('/'))
        };
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(120))
            .build()
            .map_err(|e| Error::Transport(e.to_string()))?;
        Ok(HttpBackend {
            endpoint,
            api_key: config.api_key.clone(),
            client,
            gate: Gate::new(config.max_parallel.unwrap_or(DEFAULT_MAX_PARALLEL)),
            context_window: config.context_window,
            max_attempts: 3,
        })
    }

    fn send_once(&self, request: &ChatRequest) -> std::result::Result<ChatResponse, (bool, String)> {
        let body = WireRequest {
            model: &request.model_name,
            messages: &request.messages,
            temperature: request.temperature,
            max_tokens: request.max_output_tokens,
        };
        let mut builder = self.client.post(&self.endpoint).json(&body);
        if let Some(key) = &self.api_key {
            builder = builder.bearer_auth(key);
        }
        let response = builder.send().map_err(|e| (true, e.to_string()))?;
        let status = response.status();
        if !status.is_success() {
            let retryable = status.as_u16() == 429 || status.is_server_error();
            let text = response.text().unwrap_or_default();
            return Err((retryable, format!("HTTP {status}: {text}")));
        }
        let wire: WireResponse = response.json().map_err(|e| (false, e.to_string()))?;
        let choice = wire
            .choices
            .into_iter()
            .next()
            .ok_or((false, "response had no choices".to_string()))?;
        let finish_reason = match choice.finish_reason.as_deref() {
            Some("length") => FinishReason::Length,
            Some("stop") | None => FinishReason::Stop,
            Some(_) => FinishReason::Error,
        };
        Ok(ChatResponse {
            text: choice.message.content.unwrap_or_default(),
            finish_reason,
            usage: wire.usage.map(|u| TokenUsage {
                prompt_tokens: u.prompt_tokens,
                completion_tokens: u.completion_tokens,
                total_tokens: u.total_tokens,
            }),
        })
    }
}

impl ChatBackend for HttpBackend {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse> {
        self.gate.acquire();
        let result = (|| {
            let mut last_error = String::new();
            for attempt in 0..self.max_attempts {
                if attempt > 0 {
                    std::thread::sleep(Duration::from_millis(200 << attempt));
                }
                match self.send_once(request) {
                    Ok(response) => return Ok(response),
                    Err((retryable, message)) => {
                        last_error = message;
                        if !retryable {
                            break;
                        }
                        log::warn!("backend attempt {} failed: {last_error}", attempt + 1);
                    }
                }
            }
            Err(Error::Transport(last_error))
        })();
        self.gate.release();
        result
    }

    fn context_window(&self) -> Option<usize> {
        self.context_window
    }
}

// ---------------------------------------------------------------------------
// Replay / record backends
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct StoreEntry {
    digest: String,
    request: ChatRequest,
    response: ChatResponse,
}

fn read_store(path: &Path) -> Result<HashMap<String, ChatResponse>> {
    let file = fs::File::open(path)
        .map_err(|e| Error::Io(e).context(format!("opening replay store {}", path.display())))?;
    let reader = BufReader::new(file);
    let mut map = HashMap::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let entry: StoreEntry = serde_json::from_str(&line).map_err(|e| Error::ReplayStore {
            path: path.display().to_string(),
            message: format!("line {}: {}", lineno + 1, e),
        })?;
        let recomputed = canonical_digest(&entry.request);
        if recomputed != entry.digest {
            return Err(Error::ReplayStore {
                path: path.display().to_string(),
                message: format!(
                    "line {}: stored digest {} does not match request digest {}",
                    lineno + 1,
                    entry.digest,
                    recomputed
                ),
            });
        }
        map.insert(entry.digest, entry.response);
    }
    Ok(map)
}

/// Offline backend answering only previously recorded requests.
pub struct ReplayBackend {
    store: HashMap<String, ChatResponse>,
}

impl ReplayBackend {
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        Ok(ReplayBackend {
            store: read_store(path.as_ref())?,
        })
    }

    pub fn len(&self) -> usize {
        self.store.len()
    }

    pub fn is_empty(&self) -> bool {
        self.store.is_empty()
    }
}

impl ChatBackend for ReplayBackend {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse> {
        let digest = canonical_digest(request);
        self.store
            .get(&digest)
            .cloned()
            .ok_or(Error::ReplayMiss { digest })
    }
}

/// Wraps another backend, persisting each response under its request digest.
///
/// Repeated requests are served from the store without touching the inner
/// backend, so retries can never write duplicate entries.
pub struct RecordBackend {
    inner: Box<dyn ChatBackend>,
    state: Mutex<RecordState>,
}

struct RecordState {
    cache: HashMap<String, ChatResponse>,
    seen: HashSet<String>,
    writer: BufWriter<fs::File>,
}

impl RecordBackend {
    pub fn create(path: impl AsRef<Path>, inner: Box<dyn ChatBackend>) -> Result<Self> {
        let path = path.as_ref();
        let cache = if path.exists() {
            read_store(path)?
        } else {
            HashMap::new()
        };
        let file = fs::OpenOptions::new().create(true).append(true).open(path)?;
        let seen = cache.keys().cloned().collect();
        Ok(RecordBackend {
            inner,
            state: Mutex::new(RecordState {
                cache,
                seen,
                writer: BufWriter::new(file),
            }),
        })
    }
}

impl ChatBackend for RecordBackend {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse> {
        let digest = canonical_digest(request);
        if let Some(hit) = self.state.lock().unwrap().cache.get(&digest) {
            return Ok(hit.clone());
        }
        let response = self.inner.complete(request)?;
        let mut state = self.state.lock().unwrap();
        if state.seen.insert(digest.clone()) {
            let entry = StoreEntry {
                digest: digest.clone(),
                request: request.clone(),
                response: response.clone(),
            };
            serde_json::to_writer(&mut state.writer, &entry)?;
            state.writer.write_all(b"\n")?;
            state.writer.flush()?;
            state.cache.insert(digest, response.clone());
        }
        Ok(response)
    }

    fn context_window(&self) -> Option<usize> {
        self.inner.context_window()
    }
}

// ---------------------------------------------------------------------------
// Scripted backend
// ---------------------------------------------------------------------------

/// Rule-based offline backend for tests, examples and fixture generation.
///
/// The first rule whose needles all occur in the request's message contents
/// wins; requests matching no rule get the default reply or an error.
pub struct ScriptedBackend {
    rules: Vec<(Vec<String>, String)>,
    default_reply: Option<String>,
    calls: AtomicUsize,
}

impl ScriptedBackend {
    pub fn new() -> Self {
        ScriptedBackend {
            rules: Vec::new(),
            default_reply: None,
            calls: AtomicUsize::new(0),
        }
    }

    /// Backend that answers every request with the same text.
    pub fn always(reply: impl Into<String>) -> Self {
        let mut backend = ScriptedBackend::new();
        backend.default_reply = Some(reply.into());
        backend
    }

    /// Add a rule: reply with `reply` when all `needles` occur in the request.
    pub fn rule<I, S>(mut self, needles: I, reply: impl Into<String>) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.rules
            .push((needles.into_iter().map(Into::into).collect(), reply.into()));
        self
    }

    pub fn default_reply(mut self, reply: impl Into<String>) -> Self {
        self.default_reply = Some(reply.into());
        self
    }

    /// Number of completions served so far.
    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

impl Default for ScriptedBackend {
    fn default() -> Self {
        Self::new()
    }
}

impl ChatBackend for ScriptedBackend {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let haystack: String = request
            .messages
            .iter()
            .map(|m| m.content.as_str())
            .collect::<Vec<_>>()
            .join("\n");
        for (needles, reply) in &self.rules {
            if needles.iter().all(|n| haystack.contains(n)) {
                return Ok(ChatResponse::stop(reply.clone()));
            }
        }
        match &self.default_reply {
            Some(reply) => Ok(ChatResponse::stop(reply.clone())),
            None => Err(Error::Transport(
                "scripted backend has no rule for this request".to_string(),
            )),
        }
    }
}

// ---------------------------------------------------------------------------
// Backend selection
// ---------------------------------------------------------------------------

/// Environment variables consulted when building a live backend.
pub const ENV_API_BASE: &str = "CONFACT_API_BASE";
pub const ENV_API_KEY: &str = "CONFACT_API_KEY";
pub const ENV_MODEL: &str = "CONFACT_MODEL";

/// Parsed `--backend` selector.
#[derive(Debug, Clone, PartialEq)]
pub enum BackendSpec {
    Http(HttpConfig),
    Replay(PathBuf),
    /// Record live responses from `inner` into the store at `path`.
    Record {
        path: PathBuf,
        inner: HttpConfig,
    },
}

impl BackendSpec {
    /// Parse `https://…`, `replay:<path>` or `record:<path>`.
    ///
    /// `record:` needs a live endpoint, taken from [`ENV_API_BASE`].
    pub fn parse(selector: &str) -> Result<Self> {
        if let Some(path) = selector.strip_prefix("replay:") {
            return Ok(BackendSpec::Replay(PathBuf::from(path)));
        }
        if let Some(path) = selector.strip_prefix("record:") {
            let url = std::env::var(ENV_API_BASE).map_err(|_| {
                Error::Config(format!("record backend requires {ENV_API_BASE} to be set"))
            })?;
            return Ok(BackendSpec::Record {
                path: PathBuf::from(path),
                inner: HttpConfig {
                    url,
                    api_key: std::env::var(ENV_API_KEY).ok(),
                    context_window: None,
                    max_parallel: None,
                },
            });
        }
        if selector.starts_with("http://") || selector.starts_with("https://") {
            return Ok(BackendSpec::Http(HttpConfig {
                url: selector.to_string(),
                api_key: std::env::var(ENV_API_KEY).ok(),
                context_window: None,
                max_parallel: None,
            }));
        }
        Err(Error::Config(format!(
            "backend selector `{selector}` is not a URL, replay:<path> or record:<path>"
        )))
    }

    pub fn build(&self) -> Result<Box<dyn ChatBackend>> {
        match self {
            BackendSpec::Http(config) => Ok(Box::new(HttpBackend::new(config)?)),
            BackendSpec::Replay(path) => Ok(Box::new(ReplayBackend::open(path)?)),
            BackendSpec::Record { path, inner } => Ok(Box::new(RecordBackend::create(
                path,
                Box::new(HttpBackend::new(inner)?),
            )?)),
        }
    }
}
