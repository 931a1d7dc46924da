//! Offline providers: scripted replies, a perfect judge, and a noisy one.

use std::collections::{HashMap, VecDeque};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use serde_json::json;
use sha2::{Digest, Sha256};

use crate::generator::Vocabulary;
use crate::judge::prompt::extract_target;
use crate::oracle::judge_pair;
use crate::travel::TravelTimeEstimator;

use super::{estimate_tokens, ChatProvider, ChatRequest, ChatResponse, ProviderError};

fn input_estimate(request: &ChatRequest) -> u64 {
    request.messages.iter().map(|m| estimate_tokens(&m.content)).sum()
}

#[derive(Debug, Clone, PartialEq)]
pub enum ScriptStep {
    /// Fixed content; `None` tokens are estimated from the text.
    Reply { content: String, tokens: Option<(u64, u64)> },
    Fail(ProviderError),
}

impl ScriptStep {
    pub fn reply(content: impl Into<String>, input_tokens: u64, output_tokens: u64) -> Self {
        ScriptStep::Reply { content: content.into(), tokens: Some((input_tokens, output_tokens)) }
    }

    pub fn text(content: impl Into<String>) -> Self {
        ScriptStep::Reply { content: content.into(), tokens: None }
    }

    pub fn verdict(decision: bool) -> Self {
        Self::text(json!({"decision": decision, "explanation": "scripted"}).to_string())
    }

    pub fn verdict_with_confidence(decision: bool, confidence: f64) -> Self {
        Self::text(json!({"decision": decision, "explanation": "scripted", "confidence": confidence}).to_string())
    }

    pub fn fail(status: u16) -> Self {
        ScriptStep::Fail(ProviderError::Status { status, body: format!("scripted {status}") })
    }

    pub fn timeout() -> Self {
        ScriptStep::Fail(ProviderError::Timeout)
    }
}

/// Replays a fixed sequence of steps.
///
/// Keyed queues are consulted first: a key matches when it equals the request
/// fingerprint or occurs in any message. Otherwise the default queue is used.
/// An exhausted queue yields a non-transient error.
#[derive(Debug)]
pub struct ScriptedMock {
    model_id: String,
    queue: Mutex<VecDeque<ScriptStep>>,
    keyed: Mutex<Vec<(String, VecDeque<ScriptStep>)>>,
    calls: AtomicUsize,
}

impl ScriptedMock {
    pub fn new(model_id: impl Into<String>) -> Self {
        Self { model_id: model_id.into(), queue: Mutex::default(), keyed: Mutex::default(), calls: AtomicUsize::new(0) }
    }

    pub fn then(self, step: ScriptStep) -> Self {
        self.push(step);
        self
    }

    pub fn push(&self, step: ScriptStep) {
        self.queue.lock().unwrap().push_back(step);
    }

    /// Adds `step` to the queue for requests matching `key`.
    pub fn on(self, key: impl Into<String>, step: ScriptStep) -> Self {
        let key = key.into();
        {
            let mut keyed = self.keyed.lock().unwrap();
            match keyed.iter_mut().find(|(k, _)| *k == key) {
                Some((_, queue)) => queue.push_back(step),
                None => keyed.push((key, VecDeque::from([step]))),
            }
        }
        self
    }

    /// Number of `send` calls so far.
    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    fn next_step(&self, request: &ChatRequest) -> Option<ScriptStep> {
        let fingerprint = request.fingerprint();
        let mut keyed = self.keyed.lock().unwrap();
        for (key, queue) in keyed.iter_mut() {
            let matches = *key == fingerprint || request.messages.iter().any(|m| m.content.contains(key.as_str()));
            if matches {
                if let Some(step) = queue.pop_front() {
                    return Some(step);
                }
            }
        }
        drop(keyed);
        self.queue.lock().unwrap().pop_front()
    }
}

impl ChatProvider for ScriptedMock {
    fn model_id(&self) -> &str {
        &self.model_id
    }

    fn send(&self, request: &ChatRequest) -> Result<ChatResponse, ProviderError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        match self.next_step(request) {
            None => Err(ProviderError::InvalidResponse("script exhausted".into())),
            Some(ScriptStep::Fail(err)) => Err(err),
            Some(ScriptStep::Reply { content, tokens }) => {
                let (input_tokens, output_tokens, tokens_estimated) = match tokens {
                    Some((i, o)) => (i, o, false),
                    None => (input_estimate(request), estimate_tokens(&content), true),
                };
                Ok(ChatResponse { content, input_tokens, output_tokens, latency_ms: 0, tokens_estimated })
            }
        }
    }
}

/// Answers every judging request with the rule-based verdict.
#[derive(Debug)]
pub struct OracleMock {
    model_id: String,
    vocab: Vocabulary,
    travel: TravelTimeEstimator,
}

impl OracleMock {
    pub fn new(model_id: impl Into<String>) -> Self {
        Self { model_id: model_id.into(), vocab: Vocabulary::default(), travel: TravelTimeEstimator::default() }
    }

    pub fn with_travel(mut self, travel: TravelTimeEstimator) -> Self {
        self.travel = travel;
        self
    }

    pub fn with_vocabulary(mut self, vocab: Vocabulary) -> Self {
        self.vocab = vocab;
        self
    }

    /// `(decision, explanation, wants_confidence)` for the pair carried by `request`.
    fn decide(&self, request: &ChatRequest) -> Result<(bool, String, bool), ProviderError> {
        let (user, system, wants_confidence) =
            extract_target(request, &self.vocab).map_err(ProviderError::InvalidRequest)?;
        let verdict = judge_pair(&user, &system, &self.travel).map_err(|e| ProviderError::Transport(e.to_string()))?;
        let explanation = if verdict.correct {
            "All parameters are CORRECT.".to_string()
        } else {
            let names: Vec<&str> = verdict.violations.iter().map(|c| c.as_str()).collect();
            format!("INCORRECT: {}.", names.join(", "))
        };
        Ok((verdict.correct, explanation, wants_confidence))
    }
}

fn verdict_response(request: &ChatRequest, decision: bool, explanation: &str, wants_confidence: bool, started: Instant) -> ChatResponse {
    let mut body = json!({"decision": decision, "explanation": explanation});
    if wants_confidence {
        body["confidence"] = json!(1.0);
    }
    let content = body.to_string();
    ChatResponse {
        input_tokens: input_estimate(request),
        output_tokens: estimate_tokens(&content),
        content,
        latency_ms: started.elapsed().as_millis() as u64,
        tokens_estimated: true,
    }
}

impl ChatProvider for OracleMock {
    fn model_id(&self) -> &str {
        &self.model_id
    }

    fn send(&self, request: &ChatRequest) -> Result<ChatResponse, ProviderError> {
        let started = Instant::now();
        let (decision, explanation, wants_confidence) = self.decide(request)?;
        Ok(verdict_response(request, decision, &explanation, wants_confidence, started))
    }
}

/// The oracle with each answer flipped with probability `q`.
///
/// The flip is a deterministic function of the seed, the request fingerprint
/// and how often that exact request was seen before, so repeated identical
/// requests (self-consistency samples) draw independently.
#[derive(Debug)]
pub struct NoisyOracleMock {
    oracle: OracleMock,
    flip_probability: f64,
    seed: u64,
    seen: Mutex<HashMap<String, u64>>,
}

impl NoisyOracleMock {
    pub fn new(model_id: impl Into<String>, flip_probability: f64, seed: u64) -> Self {
        Self {
            oracle: OracleMock::new(model_id),
            flip_probability: flip_probability.clamp(0.0, 1.0),
            seed,
            seen: Mutex::default(),
        }
    }

    pub fn with_travel(mut self, travel: TravelTimeEstimator) -> Self {
        self.oracle = self.oracle.with_travel(travel);
        self
    }

    fn flips(&self, request: &ChatRequest) -> bool {
        let fingerprint = request.fingerprint();
        let occurrence = {
            let mut seen = self.seen.lock().unwrap();
            let n = seen.entry(fingerprint.clone()).or_default();
            *n += 1;
            *n
        };
        let digest = Sha256::digest(format!("{}:{fingerprint}:{occurrence}", self.seed));
        let draw = u64::from_be_bytes(digest[..8].try_into().unwrap()) as f64 / (u64::MAX as f64 + 1.0);
        draw < self.flip_probability
    }
}

impl ChatProvider for NoisyOracleMock {
    fn model_id(&self) -> &str {
        self.oracle.model_id()
    }

    fn send(&self, request: &ChatRequest) -> Result<ChatResponse, ProviderError> {
        let started = Instant::now();
        let (decision, explanation, wants_confidence) = self.oracle.decide(request)?;
        let decision = decision ^ self.flips(request);
        Ok(verdict_response(request, decision, &explanation, wants_confidence, started))
    }
}
