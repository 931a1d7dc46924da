//! Every prompting strategy on the same pairs, with the oracle mock as the
//! model. Shows verdicts, call counts and rounds.

use std::sync::Arc;

use judge_bench::generator::{assemble_dataset, GeneratorConfig, UtteranceBackend};
use judge_bench::judge::{FewShotSet, Judge, JudgeInput, StrategyKind, StrategySpec};
use judge_bench::provider::{ChatProvider, CostTable, OracleMock};
use judge_bench::travel::TravelTimeEstimator;
use rust_decimal::Decimal;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let config = GeneratorConfig { n_user_blocks: 1, ..GeneratorConfig::default() };
    let pairs = assemble_dataset(&config, &UtteranceBackend::Template, &TravelTimeEstimator::default())?;

    let mut costs = CostTable::reference();
    for id in ["oracle-a", "oracle-b", "oracle-c"] {
        costs.insert(id, Decimal::ZERO, Decimal::ZERO);
    }
    for kind in StrategyKind::ALL {
        let ids: &[&str] = if kind == StrategyKind::ArCot5 { &["oracle-a", "oracle-b", "oracle-c"] } else { &["oracle-a"] };
        let panel: Vec<Arc<dyn ChatProvider>> =
            ids.iter().map(|id| Arc::new(OracleMock::new(*id)) as Arc<dyn ChatProvider>).collect();
        let shots = (kind.shot_count() > 0).then(|| FewShotSet::default_set(5));
        let judge = Judge::new(StrategySpec::new(kind), panel, shots, costs.clone())?;

        let mut line = format!("{:<8}", kind.to_string());
        for pair in &pairs {
            let input = JudgeInput { pair_id: &pair.pair_id, user: &pair.user, system: &pair.system };
            let outcome = judge.judge(input, None)?;
            let mark = if outcome.verdict.decision == pair.label.is_correct() { "✓" } else { "✗" };
            line.push_str(&format!(
                " {}:{mark} {}c/{}r",
                pair.label.slug(),
                outcome.usage.calls,
                outcome.rounds_used
            ));
        }
        println!("{line}");
    }
    Ok(())
}
