//! Token pricing from the reference rate table, plus a scripted call with
//! a provider-reported usage block.

use std::sync::Arc;

use judge_bench::judge::{Judge, JudgeInput, StrategyKind, StrategySpec};
use judge_bench::provider::{CostTable, ScriptStep, ScriptedMock};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let table = CostTable::reference();
    println!("{:<16} {:>12} {:>12} {:>14}", "model", "in $/1M", "out $/1M", "1000+500 tok");
    for (model, rates) in &table.models {
        let cost = table.cost_of(model, 1000, 500)?;
        println!("{model:<16} {:>12} {:>12} {:>14}", rates.input, rates.output, cost);
    }

    // a single judged call billed at gpt-4-turbo rates
    let mock = ScriptedMock::new("gpt-4-turbo").then(ScriptStep::reply(r#"{"decision": false}"#, 1000, 500));
    let judge = Judge::new(StrategySpec::new(StrategyKind::Io), vec![Arc::new(mock)], None, table)?;
    let pairs = judge_bench::generator::assemble_dataset(
        &judge_bench::generator::GeneratorConfig { n_user_blocks: 1, ..Default::default() },
        &judge_bench::generator::UtteranceBackend::Template,
        &judge_bench::travel::TravelTimeEstimator::default(),
    )?;
    let p = &pairs[1];
    let outcome = judge.judge(JudgeInput { pair_id: &p.pair_id, user: &p.user, system: &p.system }, None)?;
    let u = &outcome.usage;
    println!("\none io call: {} in / {} out tokens → ${}", u.input_tokens, u.output_tokens, u.cost_usd);
    Ok(())
}
