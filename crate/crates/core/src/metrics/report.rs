use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{
    efficiency_summary, per_category_accuracy, prf1, Category, ConfusionCounts, EfficiencySummary, EvaluationRecord,
    Prf1,
};

/// Everything reported for one (strategy, model set) group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub confusion: ConfusionCounts,
    pub metrics: Prf1,
    pub per_category: BTreeMap<Category, f64>,
    pub judge_failures: u64,
    pub efficiency: EfficiencySummary,
}

pub fn summarize(records: &[EvaluationRecord]) -> Vec<GroupSummary> {
    let mut groups: BTreeMap<(String, Vec<String>), Vec<EvaluationRecord>> = BTreeMap::new();
    for r in records {
        groups.entry((r.strategy.to_string(), r.model_ids.clone())).or_default().push(r.clone());
    }
    groups
        .into_values()
        .map(|group| {
            let confusion = ConfusionCounts::from_records(&group);
            GroupSummary {
                confusion,
                metrics: prf1(&confusion),
                per_category: per_category_accuracy(&group),
                judge_failures: group.iter().filter(|r| r.verdict.is_none()).count() as u64,
                efficiency: efficiency_summary(&group).remove(0),
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub groups: Vec<GroupSummary>,
}

fn cell(value: Option<f64>) -> String {
    value.map_or_else(|| "null".to_string(), |v| format!("{v:.3}"))
}

impl Report {
    pub fn from_records(records: &[EvaluationRecord]) -> Self {
        Self { groups: summarize(records) }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize")
    }

    /// Plain-text table: one row per group.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<8} {:<28} {:>5} {:>9} {:>7} {:>7} {:>5} {:>9} {:>9} {:>9} {:>11}",
            "strategy", "models", "n", "precision", "recall", "f1", "fail", "lat_ms", "tok_in", "tok_out", "cost_usd"
        );
        for g in &self.groups {
            let e = &g.efficiency;
            let _ = writeln!(
                out,
                "{:<8} {:<28} {:>5} {:>9} {:>7} {:>7} {:>5} {:>9.1} {:>9.1} {:>9.1} {:>11}{}",
                e.strategy.to_string(),
                e.model_ids.join("+"),
                e.records,
                cell(g.metrics.precision),
                cell(g.metrics.recall),
                cell(g.metrics.f1),
                g.judge_failures,
                e.mean_latency_ms,
                e.mean_input_tokens,
                e.mean_output_tokens,
                e.mean_cost_usd.round_dp(6),
                if e.tokens_estimated { "  (tokens estimated)" } else { "" }
            );
        }
        out
    }
}

/// Per-category accuracy matrix, one row per group.
pub fn category_csv(records: &[EvaluationRecord]) -> String {
    let mut writer = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["strategy".to_string(), "models".to_string()];
    header.extend(Category::ALL.iter().map(|c| c.to_string()));
    writer.write_record(&header).expect("in-memory csv");
    for g in summarize(records) {
        let mut row = vec![g.efficiency.strategy.to_string(), g.efficiency.model_ids.join("+")];
        row.extend(Category::ALL.iter().map(|c| g.per_category.get(c).map_or(String::new(), |a| format!("{a:.3}"))));
        writer.write_record(&row).expect("in-memory csv");
    }
    String::from_utf8(writer.into_inner().expect("in-memory csv")).expect("csv is utf-8")
}
