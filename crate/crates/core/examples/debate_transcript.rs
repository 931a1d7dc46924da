//! A scripted three-persona debate: split in round one, agreement in round
//! two. Prints the transcript the judge records.

use std::sync::Arc;

use judge_bench::generator::{assemble_dataset, GeneratorConfig, UtteranceBackend};
use judge_bench::judge::{Judge, JudgeInput, StrategyKind, StrategySpec};
use judge_bench::provider::{CostTable, ScriptStep, ScriptedMock};
use judge_bench::travel::TravelTimeEstimator;
use rust_decimal::Decimal;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let config = GeneratorConfig { n_user_blocks: 1, ..GeneratorConfig::default() };
    let pair = assemble_dataset(&config, &UtteranceBackend::Template, &TravelTimeEstimator::default())?.remove(2);

    // personas answer in panel order, round by round
    let script = ScriptedMock::new("scripted")
        .then(ScriptStep::text(r#"{"reasoning": "Hours look fine to me.", "decision": true}"#))
        .then(ScriptStep::text(r#"{"reasoning": "The venue is closed at the requested time.", "decision": false}"#))
        .then(ScriptStep::text(r#"{"reasoning": "Everything matches.", "decision": true}"#))
        .then(ScriptStep::text(r#"{"reasoning": "I missed the closing time; it is closed.", "decision": false}"#))
        .then(ScriptStep::text(r#"{"reasoning": "Confirmed: closed then.", "decision": false}"#))
        .then(ScriptStep::text(r#"{"reasoning": "Agreed, closed.", "decision": false}"#));
    let mut costs = CostTable::reference();
    costs.insert("scripted", Decimal::ZERO, Decimal::ZERO);
    let judge = Judge::new(StrategySpec::new(StrategyKind::Mad), vec![Arc::new(script)], None, costs)?;

    let input = JudgeInput { pair_id: &pair.pair_id, user: &pair.user, system: &pair.system };
    let outcome = judge.judge(input, None)?;
    println!("pair {} (label {})", pair.pair_id, pair.label.slug());
    for entry in &outcome.transcript {
        let verdict = entry.verdict.as_ref().map_or("?".to_string(), |v| v.decision.to_string());
        let reply = entry.response.as_deref().unwrap_or("");
        println!("round {} {:<18} {verdict:<5} {reply}", entry.round, entry.agent);
    }
    println!("final: {} after {} rounds, {} calls", outcome.verdict.decision, outcome.rounds_used, outcome.usage.calls);
    Ok(())
}
