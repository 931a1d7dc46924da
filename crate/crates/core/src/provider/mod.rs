//! Chat-completion providers.
//!
//! [`ChatProvider`] is the single seam between judging protocols and models.
//! [`complete`] wraps one provider call with the retry policy and records
//! every attempt in the [`RunLog`].

mod cost;
mod http;
mod mock;

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use cost::{CostError, CostTable, TokenRates};
pub use http::{HttpProviderConfig, OpenAiCompatible};
pub use mock::{NoisyOracleMock, OracleMock, ScriptStep, ScriptedMock};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Message {
    pub role: Role,
    pub content: String,
}

impl Message {
    pub fn system(content: impl Into<String>) -> Self {
        Self { role: Role::System, content: content.into() }
    }
    pub fn user(content: impl Into<String>) -> Self {
        Self { role: Role::User, content: content.into() }
    }
    pub fn assistant(content: impl Into<String>) -> Self {
        Self { role: Role::Assistant, content: content.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model_id: String,
    pub messages: Vec<Message>,
    pub temperature: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_output_tokens: Option<u32>,
}

impl ChatRequest {
    pub fn new(model_id: impl Into<String>, messages: Vec<Message>) -> Self {
        Self { model_id: model_id.into(), messages, temperature: 0.0, max_output_tokens: None }
    }

    pub fn validate(&self) -> Result<(), ProviderError> {
        match self.messages.first() {
            None => Err(ProviderError::InvalidRequest("no messages".into())),
            Some(m) if m.role == Role::Assistant => {
                Err(ProviderError::InvalidRequest("first message must be system or user".into()))
            }
            _ if !(self.temperature >= 0.0) => {
                Err(ProviderError::InvalidRequest(format!("temperature {}", self.temperature)))
            }
            _ => Ok(()),
        }
    }

    /// Stable hex digest over the whole request.
    pub fn fingerprint(&self) -> String {
        // length-prefixed fields; hashing directly avoids a JSON round
        let mut h = Sha256::new();
        let mut field = |bytes: &[u8]| {
            h.update((bytes.len() as u64).to_le_bytes());
            h.update(bytes);
        };
        field(self.model_id.as_bytes());
        field(&self.temperature.to_bits().to_le_bytes());
        field(&self.max_output_tokens.map_or(u64::MAX, u64::from).to_le_bytes());
        for m in &self.messages {
            field(&[m.role as u8]);
            field(m.content.as_bytes());
        }
        hex::encode(&h.finalize()[..12])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatResponse {
    pub content: String,
    pub input_tokens: u64,
    pub output_tokens: u64,
    pub latency_ms: u64,
    /// Token counts came from the whitespace fallback, not a provider usage report.
    #[serde(default)]
    pub tokens_estimated: bool,
}

/// Whitespace token count used when a provider reports no usage.
pub fn estimate_tokens(text: &str) -> u64 {
    text.split_whitespace().count() as u64
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ProviderError {
    #[error("provider returned HTTP {status}: {body}")]
    Status { status: u16, body: String },
    #[error("request timed out")]
    Timeout,
    #[error("transport error: {0}")]
    Transport(String),
    #[error("unusable response: {0}")]
    InvalidResponse(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
}

impl ProviderError {
    /// Rate limits, server errors, timeouts and transport failures.
    pub fn is_transient(&self) -> bool {
        match self {
            ProviderError::Status { status, .. } => *status == 408 || *status == 429 || *status >= 500,
            ProviderError::Timeout | ProviderError::Transport(_) => true,
            ProviderError::InvalidResponse(_) | ProviderError::InvalidRequest(_) => false,
        }
    }
}

pub trait ChatProvider: Send + Sync {
    /// Model identifier used for requests and pricing.
    fn model_id(&self) -> &str;

    /// One attempt, no retries.
    fn send(&self, request: &ChatRequest) -> Result<ChatResponse, ProviderError>;

    /// Whether the wire request may carry a temperature.
    fn supports_temperature(&self) -> bool {
        true
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub initial_delay_ms: u64,
    pub multiplier: f64,
    #[serde(default = "default_max_delay")]
    pub max_delay_ms: u64,
    #[serde(skip, default = "default_retryable")]
    pub retryable: fn(&ProviderError) -> bool,
}

fn default_max_delay() -> u64 {
    30_000
}

fn default_retryable() -> fn(&ProviderError) -> bool {
    ProviderError::is_transient
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_attempts: 3,
            initial_delay_ms: 500,
            multiplier: 2.0,
            max_delay_ms: default_max_delay(),
            retryable: default_retryable(),
        }
    }
}

impl RetryPolicy {
    /// No backoff between attempts.
    pub fn immediate(max_attempts: u32) -> Self {
        Self { max_attempts, initial_delay_ms: 0, ..Self::default() }
    }

    /// Delay before attempt `attempt + 1`, given `attempt` failures so far.
    pub fn delay_after(&self, attempt: u32) -> Duration {
        let factor = self.multiplier.max(1.0).powi(attempt.saturating_sub(1) as i32);
        let ms = (self.initial_delay_ms as f64 * factor).min(self.max_delay_ms as f64);
        Duration::from_millis(ms as u64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttemptRecord {
    pub run_id: String,
    pub session: String,
    pub pair_id: String,
    pub fingerprint: String,
    pub model_id: String,
    pub attempt: u32,
    /// `ok` or the error message.
    pub outcome: String,
    pub latency_ms: u64,
    pub input_tokens: u64,
    pub output_tokens: u64,
    pub timestamp: String,
}

impl AttemptRecord {
    pub fn succeeded(&self) -> bool {
        self.outcome == "ok"
    }
}

/// Attempt log. Keeps entries in memory and optionally appends them to a JSONL file.
#[derive(Debug)]
pub struct RunLog {
    run_id: String,
    session: String,
    file: Option<Mutex<File>>,
    entries: Mutex<Vec<AttemptRecord>>,
}

impl RunLog {
    pub fn in_memory(run_id: impl Into<String>) -> Self {
        Self { run_id: run_id.into(), session: new_session_id(), file: None, entries: Mutex::new(Vec::new()) }
    }

    pub fn append_to(run_id: impl Into<String>, path: &Path) -> std::io::Result<Self> {
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        let mut log = Self::in_memory(run_id);
        log.file = Some(Mutex::new(file));
        Ok(log)
    }

    /// Reads a persisted log, skipping a torn trailing line.
    pub fn read(path: &Path) -> std::io::Result<Vec<AttemptRecord>> {
        let reader = BufReader::new(File::open(path)?);
        let mut out = Vec::new();
        for line in reader.lines() {
            let line = line?;
            if let Ok(entry) = serde_json::from_str(&line) {
                out.push(entry);
            }
        }
        Ok(out)
    }

    pub fn run_id(&self) -> &str {
        &self.run_id
    }

    /// Identifies this process's attempts within a resumed run.
    pub fn session(&self) -> &str {
        &self.session
    }

    pub fn entries(&self) -> Vec<AttemptRecord> {
        self.entries.lock().unwrap().clone()
    }

    fn record(&self, entry: AttemptRecord) {
        if let Some(file) = &self.file {
            let line = serde_json::to_string(&entry).expect("attempt records serialize");
            let mut file = file.lock().unwrap();
            if let Err(err) = writeln!(file, "{line}") {
                log::error!("failed to append run log: {err}");
            }
        }
        self.entries.lock().unwrap().push(entry);
    }
}

fn new_session_id() -> String {
    let nanos = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_nanos())
        .unwrap_or_default();
    let digest = Sha256::digest(format!("{nanos}-{}", std::process::id()));
    hex::encode(&digest[..6])
}

#[derive(Debug, Clone, PartialEq)]
pub struct Completion {
    pub response: ChatResponse,
    pub attempts: u32,
}

/// Sends `request`, retrying transient failures per `policy`.
pub fn complete(
    provider: &dyn ChatProvider,
    request: &ChatRequest,
    policy: &RetryPolicy,
    log: Option<&RunLog>,
    pair_id: &str,
) -> Result<Completion, ProviderError> {
    request.validate()?;
    let fingerprint = request.fingerprint();
    let max_attempts = policy.max_attempts.max(1);
    let mut attempt = 0;
    loop {
        attempt += 1;
        let result = provider.send(request);
        if let Some(log) = log {
            let (outcome, latency_ms, input_tokens, output_tokens) = match &result {
                Ok(r) => ("ok".to_string(), r.latency_ms, r.input_tokens, r.output_tokens),
                Err(e) => (e.to_string(), 0, 0, 0),
            };
            log.record(AttemptRecord {
                run_id: log.run_id.clone(),
                session: log.session.clone(),
                pair_id: pair_id.to_string(),
                fingerprint: fingerprint.clone(),
                model_id: provider.model_id().to_string(),
                attempt,
                outcome,
                latency_ms,
                input_tokens,
                output_tokens,
                timestamp: chrono::Utc::now().to_rfc3339(),
            });
        }
        match result {
            Ok(response) => return Ok(Completion { response, attempts: attempt }),
            Err(err) if attempt < max_attempts && (policy.retryable)(&err) => {
                log::debug!("attempt {attempt} for {pair_id} failed: {err}; retrying");
                std::thread::sleep(policy.delay_after(attempt));
            }
            Err(err) => return Err(err),
        }
    }
}
