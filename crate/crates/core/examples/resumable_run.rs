//! A benchmark run that stops halfway and is resumed: the second session
//! only judges the pairs without a record.

use judge_bench::generator::{assemble_dataset, GeneratorConfig, UtteranceBackend};
use judge_bench::harness::{report_run, run_benchmark, ProviderConfig, RunConfig};
use judge_bench::judge::StrategyKind;
use judge_bench::model::write_dataset;
use judge_bench::travel::TravelTimeEstimator;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let dataset = dir.path().join("dataset.jsonl");
    let pairs = assemble_dataset(&GeneratorConfig::default(), &UtteranceBackend::Template, &TravelTimeEstimator::default())?;
    write_dataset(&dataset, &pairs)?;

    let mut config = RunConfig {
        dataset,
        strategy: StrategyKind::Sc(3),
        providers: vec![ProviderConfig::NoisyOracleMock { model_id: "noisy".into(), flip_probability: 0.15, seed: 1 }],
        out_dir: dir.path().join("runs"),
        run_id: Some("demo".into()),
        max_pairs: Some(250),
        ..RunConfig::default()
    };
    let first = run_benchmark(&config)?;
    println!("session 1: judged {}, {}/{} recorded", first.judged_now, first.records, first.dataset_pairs);

    config.max_pairs = None;
    config.resume = true;
    let second = run_benchmark(&config)?;
    println!("session 2: judged {}, {}/{} recorded", second.judged_now, second.records, second.dataset_pairs);

    let (_, offline) = report_run(&second.run_dir)?;
    assert_eq!(offline, second.report);
    print!("\n{}", second.report.to_table());
    println!("run log: {} calls, {} input tokens", second.log_totals.calls, second.log_totals.input_tokens);
    Ok(())
}
