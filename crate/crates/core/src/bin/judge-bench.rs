use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use judge_bench::harness::{
    read_records, run_benchmark, validate_dataset, GenerateConfig, HarnessError, ProviderConfig, RunConfig, RECORDS,
};
use judge_bench::judge::StrategyKind;
use judge_bench::metrics::{category_csv, Report};
use judge_bench::model::{read_dataset, write_dataset};
use judge_bench::travel::TravelTimeEstimator;

#[derive(Parser)]
#[command(name = "judge-bench", version, about = "Benchmark LLM judges on venue-recommendation alignment")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a labelled dataset (JSONL).
    Generate(GenerateArgs),
    /// Re-judge a dataset with the rule oracle and report disagreements.
    Validate(ValidateArgs),
    /// Judge every pair of a dataset with one strategy.
    Judge(JudgeArgs),
    /// Summarize the records of a run.
    Report(ReportArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Backend {
    Template,
    Model,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "dataset.jsonl")]
    out: PathBuf,
    #[arg(long, value_enum, default_value = "template")]
    backend: Backend,
    /// Generation config (JSON).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Provider for the model backend: shorthand, inline JSON or a JSON file.
    #[arg(long)]
    provider: Option<String>,
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long)]
    dataset: PathBuf,
    /// Write the flagged pairs here for review.
    #[arg(long)]
    flagged: Option<PathBuf>,
    /// Run config whose travel settings to use.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct JudgeArgs {
    /// Run config (JSON); flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long)]
    strategy: Option<StrategyKind>,
    /// Repeat for panels: `oracle-mock[:id]`, `noisy-oracle-mock:<q>[:<seed>[:id]]`, inline JSON or a JSON file.
    #[arg(long)]
    provider: Vec<String>,
    #[arg(long)]
    concurrency: Option<usize>,
    #[arg(long)]
    run_id: Option<String>,
    #[arg(long)]
    resume: bool,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    skip_validate: bool,
    #[arg(long)]
    max_pairs: Option<usize>,
    #[arg(long)]
    temperature: Option<f64>,
    #[arg(long)]
    max_rounds: Option<u32>,
    #[arg(long)]
    personas: Option<PathBuf>,
    #[arg(long)]
    shots: Option<PathBuf>,
    #[arg(long)]
    rates: Option<PathBuf>,
    /// Print the run summary as JSON instead of a table.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct ReportArgs {
    /// Run directory (containing records.jsonl).
    #[arg(long, conflicts_with = "records")]
    run: Option<PathBuf>,
    #[arg(long)]
    records: Option<PathBuf>,
    /// Dataset the run was judged on; pairs without a record are reported.
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Per-category accuracy matrix as CSV.
    #[arg(long)]
    by_category: bool,
    #[arg(long)]
    json: bool,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Generate(args) => generate(args),
        Command::Validate(args) => validate(args),
        Command::Judge(args) => judge(args),
        Command::Report(args) => report(args),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn generate(args: GenerateArgs) -> Result<u8, HarnessError> {
    let mut config = match &args.config {
        Some(path) => GenerateConfig::load(path)?,
        None => GenerateConfig::default(),
    };
    if let Some(seed) = args.seed {
        config.generator.seed = seed;
    }
    if let Some(p) = &args.provider {
        config.provider = Some(ProviderConfig::parse(p)?);
    }
    let pairs = config.generate(matches!(args.backend, Backend::Model))?;
    write_dataset(&args.out, &pairs)?;
    println!("wrote {} pairs to {}", pairs.len(), args.out.display());
    Ok(0)
}

fn validate(args: ValidateArgs) -> Result<u8, HarnessError> {
    let travel = match &args.config {
        Some(path) => RunConfig::load(path)?.travel,
        None => Default::default(),
    };
    let pairs = read_dataset(&args.dataset)?;
    let report = validate_dataset(&pairs, &TravelTimeEstimator::new(travel))?;
    for d in &report.disagreements {
        let found: Vec<String> = d.oracle_violations.iter().map(ToString::to_string).collect();
        println!("{}: labelled {}, oracle found [{}]", d.pair_id, d.label.slug(), found.join(", "));
    }
    for id in &report.single_error_failures {
        println!("{id}: still misaligned after restoring the labelled dimension");
    }
    if let Some(path) = &args.flagged {
        let flagged = report.flagged();
        let subset: Vec<_> = pairs.iter().filter(|p| flagged.contains(p.pair_id.as_str())).cloned().collect();
        write_dataset(path, &subset)?;
    }
    println!("{report}");
    Ok(if report.is_clean() { 0 } else { 2 })
}

fn judge(args: JudgeArgs) -> Result<u8, HarnessError> {
    let mut config = match &args.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(v) = args.dataset {
        config.dataset = v;
    }
    if let Some(v) = args.strategy {
        config.strategy = v;
    }
    if !args.provider.is_empty() {
        config.providers = args.provider.iter().map(|p| ProviderConfig::parse(p)).collect::<Result<_, _>>()?;
    }
    if let Some(v) = args.concurrency {
        config.concurrency = v;
    }
    if let Some(v) = args.run_id {
        config.run_id = Some(v);
    }
    if let Some(v) = args.out_dir {
        config.out_dir = v;
    }
    if let Some(v) = args.max_pairs {
        config.max_pairs = Some(v);
    }
    if let Some(v) = args.temperature {
        config.temperature = Some(v);
    }
    if let Some(v) = args.max_rounds {
        config.max_rounds = Some(v);
    }
    if let Some(v) = args.personas {
        config.personas = Some(v);
    }
    if let Some(v) = args.shots {
        config.shots = Some(v);
    }
    if let Some(v) = args.rates {
        config.rates = Some(v);
    }
    config.resume |= args.resume;
    config.skip_validate |= args.skip_validate;

    let summary = run_benchmark(&config)?;
    if args.json {
        println!("{}", serde_json::to_string_pretty(&summary).expect("summaries serialize"));
    } else {
        print!("{}", summary.report.to_table());
        println!(
            "run {}: {}/{} pairs recorded ({} this session) in {}",
            summary.run_id,
            summary.records,
            summary.dataset_pairs,
            summary.judged_now,
            summary.run_dir.display()
        );
    }
    for e in &summary.provider_errors {
        eprintln!("{}: {}", e.pair_id, e.error);
    }
    Ok(summary.exit_code() as u8)
}

fn report(args: ReportArgs) -> Result<u8, HarnessError> {
    let path = match (&args.run, &args.records) {
        (Some(dir), _) => dir.join(RECORDS),
        (None, Some(path)) => path.clone(),
        (None, None) => return Err(HarnessError::Config("pass --run or --records".into())),
    };
    let records = read_records(&path)?;
    if let Some(dataset) = &args.dataset {
        warn_missing(dataset, &records)?;
    }
    if args.by_category {
        print!("{}", category_csv(&records));
    } else if args.json {
        println!("{}", Report::from_records(&records).to_json());
    } else {
        print!("{}", Report::from_records(&records).to_table());
    }
    Ok(0)
}

fn warn_missing(dataset: &Path, records: &[judge_bench::metrics::EvaluationRecord]) -> Result<(), HarnessError> {
    let judged: std::collections::HashSet<&str> = records.iter().map(|r| r.pair_id.as_str()).collect();
    let missing = read_dataset(dataset)?.into_iter().filter(|p| !judged.contains(p.pair_id.as_str())).count();
    if missing > 0 {
        log::warn!("{missing} dataset pairs have no record");
    }
    Ok(())
}
