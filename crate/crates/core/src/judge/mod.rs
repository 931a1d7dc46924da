//! Judging protocols: single-call prompting, chain of thought,
//! self-consistency, multi-agent panels, debates and a multi-model roundtable.

pub mod aggregate;
pub mod prompt;
mod protocols;
pub mod shots;
pub mod verdict;

use std::fmt;
use std::str::FromStr;

use rust_decimal::Decimal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use aggregate::{aggregate_mode, confidence_weighted_vote, CalibrationTable};
pub use protocols::{Judge, JudgeInput};
pub use shots::{FewShotSet, WorkedExample};
pub use verdict::{parse_verdict, ParseError};

use crate::model::Verdict;
use crate::provider::{ChatResponse, CostError, Message, ProviderError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StrategyKind {
    Io,
    /// Chain of thought with N worked examples.
    Cot(u8),
    /// Self-consistency over n sampled chains.
    Sc(u8),
    /// Multi-agent brainstorming: one round, majority vote.
    Mab,
    /// Multi-agent debate.
    Mad,
    /// Multi-model roundtable with five-shot chain of thought.
    ArCot5,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 9] = [
        StrategyKind::Io,
        StrategyKind::Cot(1),
        StrategyKind::Cot(3),
        StrategyKind::Cot(5),
        StrategyKind::Sc(3),
        StrategyKind::Sc(5),
        StrategyKind::Mab,
        StrategyKind::Mad,
        StrategyKind::ArCot5,
    ];

    pub fn uses_reasoning(self) -> bool {
        matches!(self, StrategyKind::Cot(_) | StrategyKind::Sc(_) | StrategyKind::ArCot5)
    }

    pub fn elicits_confidence(self) -> bool {
        self == StrategyKind::ArCot5
    }

    pub fn is_persona_panel(self) -> bool {
        matches!(self, StrategyKind::Mab | StrategyKind::Mad)
    }

    /// Worked examples prepended to every call. Self-consistency samples five-shot chains.
    pub fn shot_count(self) -> usize {
        match self {
            StrategyKind::Cot(n) => n as usize,
            StrategyKind::Sc(_) | StrategyKind::ArCot5 => 5,
            StrategyKind::Io | StrategyKind::Mab | StrategyKind::Mad => 0,
        }
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StrategyKind::Io => f.write_str("io"),
            StrategyKind::Cot(n) => write!(f, "cot{n}"),
            StrategyKind::Sc(n) => write!(f, "sc{n}"),
            StrategyKind::Mab => f.write_str("mab"),
            StrategyKind::Mad => f.write_str("mad"),
            StrategyKind::ArCot5 => f.write_str("ar-cot5"),
        }
    }
}

impl FromStr for StrategyKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        StrategyKind::ALL
            .into_iter()
            .find(|k| k.to_string().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| format!("unknown strategy `{s}` (expected io, cot1, cot3, cot5, sc3, sc5, mab, mad or ar-cot5)"))
    }
}

impl Serialize for StrategyKind {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for StrategyKind {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        text.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Persona {
    pub name: String,
    pub system_prompt: String,
}

impl Persona {
    pub fn new(name: impl Into<String>, system_prompt: impl Into<String>) -> Self {
        Self { name: name.into(), system_prompt: system_prompt.into() }
    }
}

/// The shipped three-persona panel.
pub fn default_personas() -> Vec<Persona> {
    vec![
        Persona::new(
            "Investigator",
            "You are the Investigator. You reconstruct what the driver actually asked for: the dish, the price \
level hidden in their wording, the rating they expect and when and where they want to eat. You then check the \
recommendation against that reconstruction and do not let a plausible-sounding venue distract you from a missed detail.",
        ),
        Persona::new(
            "Forensic Examiner",
            "You are the Forensic Examiner. You treat the recommendation as evidence and verify every fact \
precisely: you compute the driving distance from the coordinates, read the opening hours for the exact weekday and \
minute, and compare numeric ratings against the requested threshold without rounding in the venue's favour.",
        ),
        Persona::new(
            "Auditor",
            "You are the Auditor. You follow the checklist strictly and in order: location, time, cuisine, cost, \
rating. Each item is either compliant or not; a single non-compliant item means the recommendation fails the audit.",
        ),
    ]
}

/// Loads a JSON list of personas.
pub fn load_personas(path: &std::path::Path) -> Result<Vec<Persona>, JudgeError> {
    let text = std::fs::read_to_string(path).map_err(|e| JudgeError::InvalidConfig(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| JudgeError::InvalidConfig(format!("{}: {e}", path.display())))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DebateConfig {
    /// R: the initial round counts as round 1.
    pub max_rounds: u32,
    pub personas: Vec<Persona>,
}

impl DebateConfig {
    pub fn for_kind(kind: StrategyKind) -> Self {
        let max_rounds = if kind == StrategyKind::Mab { 1 } else { 3 };
        Self { max_rounds, personas: default_personas() }
    }

    pub fn validate(&self, kind: StrategyKind) -> Result<(), JudgeError> {
        if self.max_rounds == 0 {
            return Err(JudgeError::InvalidConfig("debates need at least one round".into()));
        }
        if kind.is_persona_panel() {
            if self.personas.len() < 2 {
                return Err(JudgeError::InvalidConfig(format!("{kind} needs at least two personas")));
            }
            let mut names: Vec<&str> = self.personas.iter().map(|p| p.name.as_str()).collect();
            names.sort_unstable();
            if names.windows(2).any(|w| w[0] == w[1]) {
                return Err(JudgeError::InvalidConfig("persona names must be unique".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategySpec {
    pub kind: StrategyKind,
    /// Sampling temperature for every call; self-consistency needs diversity.
    pub temperature: f64,
    pub debate: DebateConfig,
}

impl StrategySpec {
    pub fn new(kind: StrategyKind) -> Self {
        let temperature = if matches!(kind, StrategyKind::Sc(_)) { 0.7 } else { 0.0 };
        Self { kind, temperature, debate: DebateConfig::for_kind(kind) }
    }
}

/// Summed resource use of one or more calls.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Usage {
    pub calls: u32,
    pub input_tokens: u64,
    pub output_tokens: u64,
    pub latency_ms: u64,
    #[serde(with = "rust_decimal::serde::str")]
    pub cost_usd: Decimal,
    /// Some token counts came from the whitespace fallback.
    pub tokens_estimated: bool,
}

impl Usage {
    pub fn of(response: &ChatResponse, cost_usd: Decimal) -> Self {
        Self {
            calls: 1,
            input_tokens: response.input_tokens,
            output_tokens: response.output_tokens,
            latency_ms: response.latency_ms,
            cost_usd,
            tokens_estimated: response.tokens_estimated,
        }
    }

    pub fn add(&mut self, other: &Usage) {
        self.calls += other.calls;
        self.input_tokens += other.input_tokens;
        self.output_tokens += other.output_tokens;
        self.latency_ms += other.latency_ms;
        self.cost_usd += other.cost_usd;
        self.tokens_estimated |= other.tokens_estimated;
    }
}

impl std::iter::Sum for Usage {
    fn sum<I: Iterator<Item = Usage>>(iter: I) -> Self {
        iter.fold(Usage::default(), |mut acc, u| {
            acc.add(&u);
            acc
        })
    }
}

pub const FLAG_PARSE_RETRY: &str = "parse_retry";
pub const FLAG_MISSING_CONFIDENCE: &str = "missing_confidence";

/// One model call as seen by the judge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub round: u32,
    pub agent: String,
    pub model_id: String,
    pub messages: Vec<Message>,
    pub response: Option<String>,
    pub verdict: Option<Verdict>,
    pub error: Option<String>,
    pub usage: Usage,
    /// Provider attempts behind this call, including transient failures.
    pub attempts: u32,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flags: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JudgeOutcome {
    pub verdict: Verdict,
    pub transcript: Vec<TranscriptEntry>,
    pub usage: Usage,
    pub rounds_used: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct JudgeFailure {
    pub error: JudgeError,
    pub transcript: Vec<TranscriptEntry>,
    pub usage: Usage,
    pub rounds_used: u32,
}

impl fmt::Display for JudgeFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.error.fmt(f)
    }
}

impl std::error::Error for JudgeFailure {}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum JudgeError {
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error("{agent}: no parseable verdict after {attempts} attempts ({last})")]
    Unparseable { agent: String, attempts: u32, last: ParseError },
    #[error("missing attachment: {0}")]
    MissingAttachment(String),
    #[error(transparent)]
    Cost(#[from] CostError),
    #[error("invalid judge configuration: {0}")]
    InvalidConfig(String),
}
