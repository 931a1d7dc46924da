//! Shared data vocabulary: user blocks, system blocks, labels and verdicts,
//! plus the JSONL line codec for labeled pairs.

use std::collections::HashSet;
use std::fmt;
use std::path::Path;

use chrono::{Datelike, NaiveDate, Weekday};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Schema tag written on every dataset line.
pub const SCHEMA_VERSION: &str = "judge-bench/1";

/// Minutes in a day; the exclusive upper bound of any opening interval.
pub const MINUTES_PER_DAY: u16 = 1440;

#[derive(Debug, Error, PartialEq)]
pub enum DatasetError {
    #[error("malformed JSON: {0}")]
    MalformedJson(String),
    #[error("schema violation at `{field}`: {reason}")]
    SchemaViolation { field: String, reason: String },
}

impl DatasetError {
    pub(crate) fn violation(field: impl Into<String>, reason: impl Into<String>) -> Self {
        DatasetError::SchemaViolation { field: field.into(), reason: reason.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    pub lat: f64,
    pub lon: f64,
    pub district_label: String,
}

impl GeoPoint {
    pub fn new(lat: f64, lon: f64, district_label: impl Into<String>) -> Self {
        Self { lat, lon, district_label: district_label.into() }
    }

    pub fn validate(&self) -> Result<(), DatasetError> {
        if !(-90.0..=90.0).contains(&self.lat) {
            return Err(DatasetError::violation("lat", format!("out of range: {}", self.lat)));
        }
        if !(-180.0..=180.0).contains(&self.lon) {
            return Err(DatasetError::violation("lon", format!("out of range: {}", self.lon)));
        }
        if self.district_label.trim().is_empty() {
            return Err(DatasetError::violation("district_label", "empty"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CostCategory {
    Low,
    Medium,
    High,
}

impl CostCategory {
    pub const ALL: [CostCategory; 3] = [CostCategory::Low, CostCategory::Medium, CostCategory::High];

    pub fn as_str(self) -> &'static str {
        match self {
            CostCategory::Low => "low",
            CostCategory::Medium => "medium",
            CostCategory::High => "high",
        }
    }
}

impl fmt::Display for CostCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RatingKind {
    AtLeast,
    Above,
    Around,
}

/// A rating constraint as the user phrased it ("at least 4.5", "around 4.0").
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatingExpression {
    pub kind: RatingKind,
    pub value: f64,
}

impl RatingExpression {
    pub fn new(kind: RatingKind, value: f64) -> Self {
        Self { kind, value }
    }

    /// Natural-language phrase used in utterances and prompts.
    pub fn phrase(&self) -> String {
        match self.kind {
            RatingKind::AtLeast => format!("a rating of at least {:.1}", self.value),
            RatingKind::Above => format!("a rating above {:.1}", self.value),
            RatingKind::Around => format!("a rating around {:.1}", self.value),
        }
    }

    pub fn validate(&self) -> Result<(), DatasetError> {
        if !(0.0..=5.0).contains(&self.value) {
            return Err(DatasetError::violation("rating.value", format!("out of range: {}", self.value)));
        }
        Ok(())
    }
}

/// Half-open opening interval `[open, close)` in minutes since midnight.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Interval {
    pub open: u16,
    pub close: u16,
}

impl Interval {
    pub fn new(open: u16, close: u16) -> Self {
        Self { open, close }
    }

    pub fn contains(&self, minute: u16) -> bool {
        self.open <= minute && minute < self.close
    }
}

/// Weekly opening hours. Intervals never cross midnight.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct OpeningHours {
    pub mon: Vec<Interval>,
    pub tue: Vec<Interval>,
    pub wed: Vec<Interval>,
    pub thu: Vec<Interval>,
    pub fri: Vec<Interval>,
    pub sat: Vec<Interval>,
    pub sun: Vec<Interval>,
}

impl OpeningHours {
    /// Same intervals on every day of the week.
    pub fn uniform(intervals: Vec<Interval>) -> Self {
        let mut hours = Self::default();
        for day in WEEKDAYS {
            *hours.day_mut(day) = intervals.clone();
        }
        hours
    }

    pub fn day(&self, weekday: Weekday) -> &[Interval] {
        match weekday {
            Weekday::Mon => &self.mon,
            Weekday::Tue => &self.tue,
            Weekday::Wed => &self.wed,
            Weekday::Thu => &self.thu,
            Weekday::Fri => &self.fri,
            Weekday::Sat => &self.sat,
            Weekday::Sun => &self.sun,
        }
    }

    pub fn day_mut(&mut self, weekday: Weekday) -> &mut Vec<Interval> {
        match weekday {
            Weekday::Mon => &mut self.mon,
            Weekday::Tue => &mut self.tue,
            Weekday::Wed => &mut self.wed,
            Weekday::Thu => &mut self.thu,
            Weekday::Fri => &mut self.fri,
            Weekday::Sat => &mut self.sat,
            Weekday::Sun => &mut self.sun,
        }
    }

    pub fn validate(&self) -> Result<(), DatasetError> {
        for day in WEEKDAYS {
            let intervals = self.day(day);
            let field = format!("opening_hours.{}", weekday_key(day));
            for iv in intervals {
                if iv.open >= iv.close || iv.close > MINUTES_PER_DAY {
                    return Err(DatasetError::violation(
                        field,
                        format!("invalid interval [{}, {})", iv.open, iv.close),
                    ));
                }
            }
            if intervals.windows(2).any(|w| w[0].close > w[1].open) {
                return Err(DatasetError::violation(field, "intervals overlap or are unsorted"));
            }
        }
        Ok(())
    }
}

pub const WEEKDAYS: [Weekday; 7] = [
    Weekday::Mon,
    Weekday::Tue,
    Weekday::Wed,
    Weekday::Thu,
    Weekday::Fri,
    Weekday::Sat,
    Weekday::Sun,
];

pub(crate) fn weekday_key(day: Weekday) -> &'static str {
    match day {
        Weekday::Mon => "mon",
        Weekday::Tue => "tue",
        Weekday::Wed => "wed",
        Weekday::Thu => "thu",
        Weekday::Fri => "fri",
        Weekday::Sat => "sat",
        Weekday::Sun => "sun",
    }
}

/// True iff some interval on the weekday of `date` contains `minute`.
pub fn is_open_at(hours: &OpeningHours, date: NaiveDate, minute: u16) -> bool {
    hours.day(date.weekday()).iter().any(|iv| iv.contains(minute))
}

/// Formats minutes since midnight as `HH:MM`.
pub fn format_minutes(minute: u16) -> String {
    format!("{:02}:{:02}", minute / 60, minute % 60)
}

/// Parses `HH:MM` into minutes since midnight. `24:00` is accepted.
pub fn parse_minutes(text: &str) -> Option<u16> {
    let (h, m) = text.trim().split_once(':')?;
    let h: u16 = h.parse().ok()?;
    let m: u16 = m.parse().ok()?;
    if m >= 60 || h > 24 || (h == 24 && m != 0) {
        return None;
    }
    Some(h * 60 + m)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserBlock {
    pub id: String,
    pub utterance: String,
    pub location: GeoPoint,
    pub date: NaiveDate,
    /// Minutes since midnight.
    pub time: u16,
    pub cuisine: String,
    pub cuisine_lexical: String,
    pub cost: CostCategory,
    pub cost_paraphrase: String,
    pub rating: RatingExpression,
}

impl UserBlock {
    /// Structural checks only; vocabulary membership is checked by the generator.
    pub fn validate(&self) -> Result<(), DatasetError> {
        if self.id.is_empty() {
            return Err(DatasetError::violation("user.id", "empty"));
        }
        self.location.validate()?;
        if self.time >= MINUTES_PER_DAY {
            return Err(DatasetError::violation("time", format!("out of range: {}", self.time)));
        }
        self.rating.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemBlock {
    pub venue_name: String,
    pub location: GeoPoint,
    pub cuisine: String,
    pub cost: CostCategory,
    pub rating: f64,
    pub opening_hours: OpeningHours,
}

impl SystemBlock {
    pub fn validate(&self) -> Result<(), DatasetError> {
        if self.venue_name.trim().is_empty() {
            return Err(DatasetError::violation("venue_name", "empty"));
        }
        self.location.validate()?;
        if !(0.0..=5.0).contains(&self.rating) {
            return Err(DatasetError::violation("rating", format!("out of range: {}", self.rating)));
        }
        self.opening_hours.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ErrorCategory {
    Location,
    Time,
    Cuisine,
    Cost,
    Rating,
}

impl ErrorCategory {
    pub const ALL: [ErrorCategory; 5] = [
        ErrorCategory::Location,
        ErrorCategory::Time,
        ErrorCategory::Cuisine,
        ErrorCategory::Cost,
        ErrorCategory::Rating,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ErrorCategory::Location => "location",
            ErrorCategory::Time => "time",
            ErrorCategory::Cuisine => "cuisine",
            ErrorCategory::Cost => "cost",
            ErrorCategory::Rating => "rating",
        }
    }
}

impl fmt::Display for ErrorCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Label {
    Correct,
    Incorrect { error: ErrorCategory },
}

impl Label {
    pub fn is_correct(self) -> bool {
        matches!(self, Label::Correct)
    }

    /// Short slug: `correct` or the error category name.
    pub fn slug(self) -> &'static str {
        match self {
            Label::Correct => "correct",
            Label::Incorrect { error } => error.as_str(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledPair {
    pub schema: String,
    pub pair_id: String,
    pub user: UserBlock,
    pub system: SystemBlock,
    pub label: Label,
}

impl LabeledPair {
    pub fn new(pair_id: impl Into<String>, user: UserBlock, system: SystemBlock, label: Label) -> Self {
        Self { schema: SCHEMA_VERSION.to_string(), pair_id: pair_id.into(), user, system, label }
    }

    pub fn validate(&self) -> Result<(), DatasetError> {
        if self.schema != SCHEMA_VERSION {
            return Err(DatasetError::violation(
                "schema",
                format!("expected {SCHEMA_VERSION:?}, found {:?}", self.schema),
            ));
        }
        if self.pair_id.is_empty() {
            return Err(DatasetError::violation("pair_id", "empty"));
        }
        self.user.validate()?;
        self.system.validate()
    }
}

/// A judge's decision on one pair. `decision == true` means aligned.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub decision: bool,
    pub explanation: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confidence: Option<f64>,
}

/// Encodes a pair as one JSONL line (no trailing newline).
pub fn serialize_pair(pair: &LabeledPair) -> String {
    serde_json::to_string(pair).expect("labeled pairs always serialize")
}

/// Decodes one JSONL line, naming the offending field on schema errors.
pub fn deserialize_pair(text: &str) -> Result<LabeledPair, DatasetError> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| DatasetError::MalformedJson(e.to_string()))?;
    let pair: LabeledPair = serde_path_to_error::deserialize(value).map_err(|e| {
        let message = e.inner().to_string();
        if let Some(field) = missing_field_name(&message) {
            DatasetError::violation(field, "missing")
        } else {
            let path = e.path().to_string();
            let field = path.rsplit('.').next().unwrap_or(&path).to_string();
            DatasetError::violation(field, message)
        }
    })?;
    pair.validate()?;
    Ok(pair)
}

#[derive(Debug, Error)]
pub enum DatasetFileError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("line {line}: {source}")]
    Line { line: usize, source: DatasetError },
    #[error("line {line}: duplicate pair id `{pair_id}`")]
    DuplicatePairId { line: usize, pair_id: String },
}

/// Writes pairs as JSONL, one per line.
pub fn write_dataset(path: &Path, pairs: &[LabeledPair]) -> Result<(), DatasetFileError> {
    let mut text = String::new();
    for pair in pairs {
        text.push_str(&serialize_pair(pair));
        text.push('\n');
    }
    std::fs::write(path, text).map_err(|source| DatasetFileError::Io { path: path.display().to_string(), source })
}

/// Reads a JSONL dataset, rejecting the first invalid line. Blank lines are skipped.
pub fn read_dataset(path: &Path) -> Result<Vec<LabeledPair>, DatasetFileError> {
    let text = std::fs::read_to_string(path)
        .map_err(|source| DatasetFileError::Io { path: path.display().to_string(), source })?;
    parse_dataset(&text)
}

pub fn parse_dataset(text: &str) -> Result<Vec<LabeledPair>, DatasetFileError> {
    let mut seen = HashSet::new();
    let mut pairs = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let pair = deserialize_pair(line).map_err(|source| DatasetFileError::Line { line: i + 1, source })?;
        if !seen.insert(pair.pair_id.clone()) {
            return Err(DatasetFileError::DuplicatePairId { line: i + 1, pair_id: pair.pair_id });
        }
        pairs.push(pair);
    }
    Ok(pairs)
}

fn missing_field_name(message: &str) -> Option<&str> {
    let rest = message.strip_prefix("missing field `")?;
    rest.split('`').next()
}
