//! Effectiveness, efficiency and agreement statistics over judged pairs.
//!
//! The positive class is a *misaligned* recommendation: a true positive is
//! an incorrect recommendation the judge rejected. A pair the judge failed
//! to answer counts as judged wrongly.

mod alpha;
mod report;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rust_decimal::Decimal;
use serde::{Deserialize, Serialize};

pub use alpha::{krippendorff_alpha, AlphaError, AlphaMetric, AnnotationMatrix};
pub use report::{category_csv, summarize, GroupSummary, Report};

use crate::judge::StrategyKind;
use crate::model::{ErrorCategory, Label, Verdict};
use crate::provider::{AttemptRecord, CostError, CostTable};

/// Per-pair judge outcome, as persisted by the harness.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationRecord {
    pub run_id: String,
    /// Process session that produced the record; ties it to its run-log attempts.
    pub session: String,
    pub pair_id: String,
    pub strategy: StrategyKind,
    pub model_ids: Vec<String>,
    pub label: Label,
    /// `None` when the judge failed to produce a verdict.
    pub verdict: Option<Verdict>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub calls: u32,
    pub input_tokens: u64,
    pub output_tokens: u64,
    pub latency_ms: u64,
    #[serde(with = "rust_decimal::serde::str")]
    pub cost_usd: Decimal,
    pub rounds_used: u32,
    #[serde(default)]
    pub tokens_estimated: bool,
    pub completed_at: String,
}

impl EvaluationRecord {
    /// Whether the judge's decision matches the label. Failures never match.
    pub fn judged_correctly(&self) -> bool {
        self.verdict.as_ref().is_some_and(|v| v.decision == self.label.is_correct())
    }

    pub fn category(&self) -> Category {
        Category::of(self.label)
    }
}

/// Row key for per-category accuracy: aligned pairs, then one per error kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Category {
    Positive,
    Location,
    Time,
    Cuisine,
    Cost,
    Rating,
}

impl Category {
    pub const ALL: [Category; 6] =
        [Category::Positive, Category::Location, Category::Time, Category::Cuisine, Category::Cost, Category::Rating];

    pub fn of(label: Label) -> Self {
        match label {
            Label::Correct => Category::Positive,
            Label::Incorrect { error } => match error {
                ErrorCategory::Location => Category::Location,
                ErrorCategory::Time => Category::Time,
                ErrorCategory::Cuisine => Category::Cuisine,
                ErrorCategory::Cost => Category::Cost,
                ErrorCategory::Rating => Category::Rating,
            },
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Category::Positive => "positive",
            Category::Location => "location",
            Category::Time => "time",
            Category::Cuisine => "cuisine",
            Category::Cost => "cost",
            Category::Rating => "rating",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionCounts {
    pub fn new(tp: u64, fp: u64, tn: u64, fn_: u64) -> Self {
        Self { tp, fp, tn, fn_ }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn from_records<'a>(records: impl IntoIterator<Item = &'a EvaluationRecord>) -> Self {
        let mut counts = Self::default();
        for r in records {
            let misaligned = !r.label.is_correct();
            match (misaligned, r.judged_correctly()) {
                (true, true) => counts.tp += 1,
                (true, false) => counts.fn_ += 1,
                (false, true) => counts.tn += 1,
                (false, false) => counts.fp += 1,
            }
        }
        counts
    }
}

/// Undefined cells (zero denominators) are `None` and serialize as null.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prf1 {
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

pub fn prf1(counts: &ConfusionCounts) -> Prf1 {
    let precision = ratio(counts.tp, counts.tp + counts.fp);
    let recall = ratio(counts.tp, counts.tp + counts.fn_);
    let f1 = match (precision, recall) {
        (Some(p), Some(r)) if p + r > 0.0 => Some(2.0 * p * r / (p + r)),
        _ => None,
    };
    Prf1 { precision, recall, f1 }
}

/// Accuracy per category; categories without records are omitted.
pub fn per_category_accuracy<'a>(records: impl IntoIterator<Item = &'a EvaluationRecord>) -> BTreeMap<Category, f64> {
    let mut tally: BTreeMap<Category, (u64, u64)> = BTreeMap::new();
    for r in records {
        let entry = tally.entry(r.category()).or_default();
        entry.0 += u64::from(r.judged_correctly());
        entry.1 += 1;
    }
    tally.into_iter().map(|(c, (hit, n))| (c, hit as f64 / n as f64)).collect()
}

/// Means and totals for one (strategy, model set) group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EfficiencySummary {
    pub strategy: StrategyKind,
    pub model_ids: Vec<String>,
    pub records: u64,
    pub mean_latency_ms: f64,
    pub mean_input_tokens: f64,
    pub mean_output_tokens: f64,
    pub mean_calls: f64,
    #[serde(with = "rust_decimal::serde::str")]
    pub mean_cost_usd: Decimal,
    pub total_latency_ms: u64,
    pub total_input_tokens: u64,
    pub total_output_tokens: u64,
    pub total_calls: u64,
    #[serde(with = "rust_decimal::serde::str")]
    pub total_cost_usd: Decimal,
    /// Some token counts came from the whitespace fallback.
    pub tokens_estimated: bool,
}

pub fn efficiency_summary<'a>(records: impl IntoIterator<Item = &'a EvaluationRecord>) -> Vec<EfficiencySummary> {
    let mut groups: BTreeMap<(String, Vec<String>), Vec<&EvaluationRecord>> = BTreeMap::new();
    for r in records {
        groups.entry((r.strategy.to_string(), r.model_ids.clone())).or_default().push(r);
    }
    groups
        .into_values()
        .map(|group| {
            let n = group.len() as u64;
            let total_latency_ms: u64 = group.iter().map(|r| r.latency_ms).sum();
            let total_input_tokens: u64 = group.iter().map(|r| r.input_tokens).sum();
            let total_output_tokens: u64 = group.iter().map(|r| r.output_tokens).sum();
            let total_calls: u64 = group.iter().map(|r| u64::from(r.calls)).sum();
            let total_cost_usd: Decimal = group.iter().map(|r| r.cost_usd).sum();
            EfficiencySummary {
                strategy: group[0].strategy,
                model_ids: group[0].model_ids.clone(),
                records: n,
                mean_latency_ms: total_latency_ms as f64 / n as f64,
                mean_input_tokens: total_input_tokens as f64 / n as f64,
                mean_output_tokens: total_output_tokens as f64 / n as f64,
                mean_calls: total_calls as f64 / n as f64,
                mean_cost_usd: total_cost_usd / Decimal::from(n),
                total_latency_ms,
                total_input_tokens,
                total_output_tokens,
                total_calls,
                total_cost_usd,
                tokens_estimated: group.iter().any(|r| r.tokens_estimated),
            }
        })
        .collect()
}

/// Token and cost totals recomputed from the provider attempt log.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LogTotals {
    pub calls: u64,
    pub input_tokens: u64,
    pub output_tokens: u64,
    #[serde(with = "rust_decimal::serde::str")]
    pub cost_usd: Decimal,
}

/// Sums the successful attempts behind `records`.
///
/// Attempts are matched by (session, pair id), so calls made for a pair that
/// was interrupted and later re-judged in another session are excluded.
pub fn run_log_totals(
    records: &[EvaluationRecord],
    attempts: &[AttemptRecord],
    costs: &CostTable,
) -> Result<LogTotals, CostError> {
    let judged: BTreeSet<(&str, &str)> = records.iter().map(|r| (r.session.as_str(), r.pair_id.as_str())).collect();
    let run_ids: BTreeSet<&str> = records.iter().map(|r| r.run_id.as_str()).collect();
    let mut totals = LogTotals::default();
    for a in attempts.iter().filter(|a| a.succeeded()) {
        if !run_ids.contains(a.run_id.as_str()) || !judged.contains(&(a.session.as_str(), a.pair_id.as_str())) {
            continue;
        }
        totals.calls += 1;
        totals.input_tokens += a.input_tokens;
        totals.output_tokens += a.output_tokens;
        totals.cost_usd += costs.cost_of(&a.model_id, a.input_tokens, a.output_tokens)?;
    }
    Ok(totals)
}
