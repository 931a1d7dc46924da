//! Confusion counts, P/R/F1 and the per-category matrix for a synthetic
//! set of judge outcomes.

use judge_bench::metrics::{category_csv, prf1, ConfusionCounts, EvaluationRecord, Report};
use judge_bench::judge::StrategyKind;
use judge_bench::model::{ErrorCategory, Label, Verdict};
use rust_decimal::Decimal;

fn record(i: usize, label: Label, verdict: Option<bool>) -> EvaluationRecord {
    EvaluationRecord {
        run_id: "demo".into(),
        session: "s".into(),
        pair_id: format!("p{i}"),
        strategy: StrategyKind::Cot(3),
        model_ids: vec!["some-model".into()],
        label,
        verdict: verdict.map(|decision| Verdict { decision, explanation: String::new(), confidence: None }),
        error: verdict.is_none().then(|| "unparseable".to_string()),
        calls: 1,
        input_tokens: 900,
        output_tokens: 120,
        latency_ms: 800,
        cost_usd: Decimal::new(12, 4),
        rounds_used: 1,
        tokens_estimated: false,
        completed_at: "2024-01-01T00:00:00Z".into(),
    }
}

fn main() {
    // a judge that misses some time errors and fails on one pair
    let mut records = Vec::new();
    for i in 0..60 {
        let label = match i % 6 {
            0 => Label::Correct,
            k => Label::Incorrect { error: ErrorCategory::ALL[k - 1] },
        };
        let verdict = match label {
            Label::Incorrect { error: ErrorCategory::Time } if i % 4 == 0 => Some(true),
            _ if i == 59 => None,
            _ => Some(label.is_correct()),
        };
        records.push(record(i, label, verdict));
    }
    let counts = ConfusionCounts::from_records(&records);
    let m = prf1(&counts);
    println!("{counts:?}");
    println!("precision {:?} recall {:?} f1 {:?}\n", m.precision, m.recall, m.f1);
    print!("{}", Report::from_records(&records).to_table());
    println!();
    print!("{}", category_csv(&records));

    // with no misaligned pair caught at all, F1 is undefined
    println!("\nall-wrong judge: {:?}", prf1(&ConfusionCounts::new(0, 10, 0, 50)));
}
