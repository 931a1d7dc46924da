//! End-to-end runs: validate a dataset, judge every pair with a strategy,
//! persist records incrementally and summarize.
//!
//! A run directory can be resumed: pairs that already have a record are
//! never judged again, so an interrupted run finishes with exactly one
//! record per pair.

mod store;

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{mpsc, Arc};
use std::time::Instant;

use rust_decimal::Decimal;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use store::{read_records, PairState, PairStatus, RunManifest, TranscriptLine, MANIFEST, RECORDS, RUN_LOG, SUMMARY, TRANSCRIPTS};

use crate::generator::{assemble_dataset, restore_dimension, GenerationError, GeneratorConfig, UtteranceBackend};
use crate::judge::{
    load_personas, FewShotSet, Judge, JudgeError, JudgeFailure, JudgeInput, JudgeOutcome, StrategyKind, StrategySpec,
};
use crate::metrics::{run_log_totals, EvaluationRecord, LogTotals, Report};
use crate::model::{read_dataset, DatasetFileError, ErrorCategory, Label, LabeledPair};
use crate::oracle::judge_pair;
use crate::provider::{
    ChatProvider, CostError, CostTable, HttpProviderConfig, NoisyOracleMock, OpenAiCompatible, OracleMock, RetryPolicy,
    RunLog,
};
use crate::travel::{TravelBackend, TravelError, TravelTimeEstimator};
use store::{io_err, RunStore};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("dataset failed validation: {0}")]
    DatasetInvalid(ValidationReport),
    #[error(transparent)]
    Dataset(#[from] DatasetFileError),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error(transparent)]
    Judge(#[from] JudgeError),
    #[error(transparent)]
    Cost(#[from] CostError),
    #[error(transparent)]
    Travel(#[from] TravelError),
    #[error(transparent)]
    Generation(#[from] GenerationError),
}

impl HarnessError {
    /// Process exit code: 2 for an invalid dataset, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::DatasetInvalid(_) => 2,
            _ => 1,
        }
    }
}

/// How to reach one judge model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProviderConfig {
    Http(HttpProviderConfig),
    OracleMock {
        #[serde(default = "default_oracle_id")]
        model_id: String,
    },
    NoisyOracleMock {
        #[serde(default = "default_noisy_id")]
        model_id: String,
        flip_probability: f64,
        #[serde(default)]
        seed: u64,
    },
}

fn default_oracle_id() -> String {
    "oracle-mock".into()
}

fn default_noisy_id() -> String {
    "noisy-oracle-mock".into()
}

impl ProviderConfig {
    pub fn model_id(&self) -> &str {
        match self {
            ProviderConfig::Http(c) => &c.model_id,
            ProviderConfig::OracleMock { model_id } | ProviderConfig::NoisyOracleMock { model_id, .. } => model_id,
        }
    }

    pub fn is_mock(&self) -> bool {
        !matches!(self, ProviderConfig::Http(_))
    }

    /// Parses `oracle-mock[:id]`, `noisy-oracle-mock:<q>[:<seed>[:id]]`,
    /// inline JSON, or a path to a JSON file.
    pub fn parse(text: &str) -> Result<Self, HarnessError> {
        let bad = |e: String| HarnessError::Config(format!("provider `{text}`: {e}"));
        let trimmed = text.trim();
        if trimmed.starts_with('{') {
            return serde_json::from_str(trimmed).map_err(|e| bad(e.to_string()));
        }
        let mut parts = trimmed.split(':');
        match parts.next() {
            Some("oracle-mock") => Ok(ProviderConfig::OracleMock {
                model_id: parts.next().map_or_else(default_oracle_id, str::to_string),
            }),
            Some("noisy-oracle-mock") => {
                let flip_probability = parts
                    .next()
                    .ok_or_else(|| bad("missing flip probability".into()))?
                    .parse()
                    .map_err(|e| bad(format!("{e}")))?;
                let seed = parts.next().map(str::parse).transpose().map_err(|e| bad(format!("{e}")))?.unwrap_or(0);
                let model_id = parts.next().map_or_else(default_noisy_id, str::to_string);
                Ok(ProviderConfig::NoisyOracleMock { model_id, flip_probability, seed })
            }
            _ => {
                let path = Path::new(trimmed);
                let body = std::fs::read_to_string(path).map_err(|e| bad(e.to_string()))?;
                serde_json::from_str(&body).map_err(|e| bad(e.to_string()))
            }
        }
    }

    pub fn build(&self, travel: &TravelBackend) -> Result<Arc<dyn ChatProvider>, HarnessError> {
        Ok(match self {
            ProviderConfig::Http(c) => Arc::new(
                OpenAiCompatible::new(c.clone()).map_err(|e| HarnessError::Config(format!("{}: {e}", c.model_id)))?,
            ),
            ProviderConfig::OracleMock { model_id } => {
                Arc::new(OracleMock::new(model_id.clone()).with_travel(TravelTimeEstimator::new(travel.clone())))
            }
            ProviderConfig::NoisyOracleMock { model_id, flip_probability, seed } => {
                if !(0.0..=1.0).contains(flip_probability) {
                    return Err(HarnessError::Config(format!("flip probability {flip_probability} outside [0, 1]")));
                }
                Arc::new(
                    NoisyOracleMock::new(model_id.clone(), *flip_probability, *seed)
                        .with_travel(TravelTimeEstimator::new(travel.clone())),
                )
            }
        })
    }
}

/// A benchmark run. Loadable from one JSON document; CLI flags override it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub dataset: PathBuf,
    pub strategy: StrategyKind,
    pub providers: Vec<ProviderConfig>,
    /// Upper bound on pairs judged at once (and so on in-flight requests).
    pub concurrency: usize,
    pub retry: RetryPolicy,
    pub out_dir: PathBuf,
    pub run_id: Option<String>,
    pub resume: bool,
    pub skip_validate: bool,
    /// Overrides the strategy's default temperature.
    pub temperature: Option<f64>,
    /// Overrides the debate round limit.
    pub max_rounds: Option<u32>,
    pub personas: Option<PathBuf>,
    pub shots: Option<PathBuf>,
    /// Rate table; defaults to the shipped one. Mock models are priced at zero.
    pub rates: Option<PathBuf>,
    pub travel: TravelBackend,
    /// Stop after judging this many pending pairs (useful for staged runs).
    pub max_pairs: Option<usize>,
}

impl PartialEq for RetryPolicy {
    fn eq(&self, other: &Self) -> bool {
        self.max_attempts == other.max_attempts
            && self.initial_delay_ms == other.initial_delay_ms
            && self.multiplier == other.multiplier
            && self.max_delay_ms == other.max_delay_ms
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            dataset: PathBuf::from("dataset.jsonl"),
            strategy: StrategyKind::Io,
            providers: Vec::new(),
            concurrency: 8,
            retry: RetryPolicy::default(),
            out_dir: PathBuf::from("runs"),
            run_id: None,
            resume: false,
            skip_validate: false,
            temperature: None,
            max_rounds: None,
            personas: None,
            shots: None,
            rates: None,
            travel: TravelBackend::default(),
            max_pairs: None,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        let mut de = serde_json::Deserializer::from_str(&text);
        serde_path_to_error::deserialize(&mut de)
            .map_err(|e| HarnessError::Config(format!("{}: {} at `{}`", path.display(), e.inner(), e.path())))
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.providers.is_empty() {
            return Err(HarnessError::Config("no provider configured".into()));
        }
        if self.strategy == StrategyKind::ArCot5 && self.providers.len() < 2 {
            return Err(HarnessError::Config("ar-cot5 needs at least two providers".into()));
        }
        if self.strategy != StrategyKind::ArCot5 && self.providers.len() > 1 {
            return Err(HarnessError::Config(format!("{} uses exactly one provider", self.strategy)));
        }
        if self.concurrency == 0 {
            return Err(HarnessError::Config("concurrency must be at least 1".into()));
        }
        if self.retry.max_attempts == 0 {
            return Err(HarnessError::Config("retry.max_attempts must be at least 1".into()));
        }
        if !self.dataset.is_file() {
            return Err(HarnessError::Config(format!("dataset {} not found", self.dataset.display())));
        }
        for path in [&self.personas, &self.shots, &self.rates].into_iter().flatten() {
            if !path.is_file() {
                return Err(HarnessError::Config(format!("{} not found", path.display())));
            }
        }
        Ok(())
    }

    /// Rate table with zero rates added for mock models.
    pub fn cost_table(&self) -> Result<CostTable, HarnessError> {
        let mut table = match &self.rates {
            Some(path) => CostTable::load(path)?,
            None => CostTable::reference(),
        };
        for p in self.providers.iter().filter(|p| p.is_mock()) {
            if !table.contains(p.model_id()) {
                table.insert(p.model_id(), Decimal::ZERO, Decimal::ZERO);
            }
        }
        Ok(table)
    }

    pub fn build_judge(&self) -> Result<Judge, HarnessError> {
        let mut spec = StrategySpec::new(self.strategy);
        if let Some(t) = self.temperature {
            spec.temperature = t;
        }
        if let Some(r) = self.max_rounds {
            spec.debate.max_rounds = r;
        }
        if let Some(path) = &self.personas {
            spec.debate.personas = load_personas(path)?;
        }
        let shots = match (&self.shots, self.strategy.shot_count()) {
            (_, 0) => None,
            (Some(path), _) => Some(FewShotSet::load(path).map_err(HarnessError::Config)?),
            (None, _) => Some(FewShotSet::default_set(5)),
        };
        let panel = self.providers.iter().map(|p| p.build(&self.travel)).collect::<Result<Vec<_>, _>>()?;
        Ok(Judge::new(spec, panel, shots, self.cost_table()?)?.with_retry(self.retry))
    }
}

/// Dataset generation settings: generator knobs, travel estimator and,
/// for the model backend, the provider that writes the text.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenerateConfig {
    pub generator: GeneratorConfig,
    pub travel: TravelBackend,
    pub provider: Option<ProviderConfig>,
    pub retry: RetryPolicy,
}

impl GenerateConfig {
    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        let mut de = serde_json::Deserializer::from_str(&text);
        serde_path_to_error::deserialize(&mut de)
            .map_err(|e| HarnessError::Config(format!("{}: {} at `{}`", path.display(), e.inner(), e.path())))
    }

    /// Generates the dataset; `use_model` selects the model backend.
    pub fn generate(&self, use_model: bool) -> Result<Vec<LabeledPair>, HarnessError> {
        let backend = if use_model {
            let provider = self
                .provider
                .as_ref()
                .ok_or_else(|| HarnessError::Config("the model backend needs a provider".into()))?;
            UtteranceBackend::Model { provider: provider.build(&self.travel)?, retry: self.retry }
        } else {
            UtteranceBackend::Template
        };
        Ok(assemble_dataset(&self.generator, &backend, &TravelTimeEstimator::new(self.travel.clone()))?)
    }
}

// ---------------------------------------------------------------------------
// validation

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Disagreement {
    pub pair_id: String,
    pub label: Label,
    pub oracle_violations: BTreeSet<ErrorCategory>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub pairs: usize,
    /// Pairs whose label differs from the oracle's verdict.
    pub disagreements: Vec<Disagreement>,
    /// Error pairs that stay incorrect after restoring the labelled dimension
    /// from the same user's aligned pair (or that have no aligned pair).
    pub single_error_failures: Vec<String>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.disagreements.is_empty() && self.single_error_failures.is_empty()
    }

    /// Ids of every pair that needs a human look.
    pub fn flagged(&self) -> BTreeSet<&str> {
        self.disagreements
            .iter()
            .map(|d| d.pair_id.as_str())
            .chain(self.single_error_failures.iter().map(String::as_str))
            .collect()
    }
}

impl std::fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{} pairs, {} label disagreements, {} single-error failures",
            self.pairs,
            self.disagreements.len(),
            self.single_error_failures.len()
        )
    }
}

/// Re-judges every pair with the oracle and checks the single-error property.
pub fn validate_dataset(pairs: &[LabeledPair], travel: &TravelTimeEstimator) -> Result<ValidationReport, TravelError> {
    use rayon::prelude::*;
    let aligned: BTreeMap<&str, &LabeledPair> =
        pairs.iter().filter(|p| p.label.is_correct()).map(|p| (p.user.id.as_str(), p)).collect();
    let checks: Vec<(Option<Disagreement>, Option<String>)> = pairs
        .par_iter()
        .map(|pair| {
            let verdict = judge_pair(&pair.user, &pair.system, travel)?;
            let disagreement = (!verdict.matches(pair.label)).then(|| Disagreement {
                pair_id: pair.pair_id.clone(),
                label: pair.label,
                oracle_violations: verdict.violations.clone(),
            });
            let single_error_failure = match pair.label {
                Label::Correct => None,
                Label::Incorrect { error } => {
                    let restored_ok = match aligned.get(pair.user.id.as_str()) {
                        Some(base) => {
                            let restored = restore_dimension(&pair.system, &base.system, error);
                            judge_pair(&pair.user, &restored, travel)?.correct
                        }
                        None => false,
                    };
                    (!restored_ok).then(|| pair.pair_id.clone())
                }
            };
            Ok((disagreement, single_error_failure))
        })
        .collect::<Result<_, TravelError>>()?;
    let mut report = ValidationReport { pairs: pairs.len(), ..Default::default() };
    for (d, s) in checks {
        report.disagreements.extend(d);
        report.single_error_failures.extend(s);
    }
    Ok(report)
}

// ---------------------------------------------------------------------------
// runs

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairError {
    pub pair_id: String,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub run_id: String,
    pub run_dir: PathBuf,
    pub strategy: StrategyKind,
    pub model_ids: Vec<String>,
    pub dataset_pairs: usize,
    pub records: usize,
    /// Pairs judged by this session.
    pub judged_now: usize,
    /// Pairs left without a record because the provider gave up.
    pub provider_errors: Vec<PairError>,
    pub complete: bool,
    pub report: Report,
    /// Token and cost totals recomputed from the attempt log.
    pub log_totals: LogTotals,
}

impl RunSummary {
    /// 3 when some pair could not be judged because the provider gave up.
    pub fn exit_code(&self) -> i32 {
        if self.provider_errors.is_empty() { 0 } else { 3 }
    }
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339()
}

fn sha256_file(path: &Path) -> Result<String, HarnessError> {
    let bytes = std::fs::read(path).map_err(io_err(path))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

enum Outcome {
    Judged(JudgeOutcome),
    Failed(JudgeFailure),
}

struct Finished {
    index: usize,
    outcome: Outcome,
    wall_ms: u64,
}

/// Judges every pending pair of the dataset and writes the run directory.
pub fn run_benchmark(config: &RunConfig) -> Result<RunSummary, HarnessError> {
    config.validate()?;
    let pairs = read_dataset(&config.dataset)?;
    let travel = TravelTimeEstimator::new(config.travel.clone());
    if !config.skip_validate {
        let report = validate_dataset(&pairs, &travel)?;
        if !report.is_clean() {
            return Err(HarnessError::DatasetInvalid(report));
        }
    }
    let judge = config.build_judge()?;
    let costs = config.cost_table()?;

    let run_id = config.run_id.clone().unwrap_or_else(|| chrono::Utc::now().format("run-%Y%m%d-%H%M%S").to_string());
    let dir = config.out_dir.join(&run_id);
    let manifest_path = dir.join(MANIFEST);
    let dataset_sha256 = sha256_file(&config.dataset)?;

    let mut manifest = if manifest_path.exists() {
        if !config.resume {
            return Err(HarnessError::Config(format!("run `{run_id}` already exists; pass --resume to continue it")));
        }
        let manifest = RunManifest::load(&manifest_path)?;
        if manifest.dataset_sha256 != dataset_sha256 {
            return Err(HarnessError::Config(format!("run `{run_id}` was started on a different dataset")));
        }
        if manifest.config.strategy != config.strategy {
            return Err(HarnessError::Config(format!(
                "run `{run_id}` uses strategy {}, not {}",
                manifest.config.strategy, config.strategy
            )));
        }
        manifest
    } else {
        let created = now();
        RunManifest {
            run_id: run_id.clone(),
            created_at: created.clone(),
            updated_at: created,
            dataset_sha256,
            config: config.clone(),
            sessions: Vec::new(),
            pairs: BTreeMap::new(),
        }
    };

    let mut store = RunStore::open(&dir)?;
    let log = RunLog::append_to(run_id.clone(), &dir.join(RUN_LOG)).map_err(io_err(&dir.join(RUN_LOG)))?;
    let session = log.session().to_string();
    manifest.sessions.push(session.clone());

    let existing = read_records(&dir.join(RECORDS))?;
    let mut done: BTreeSet<String> = existing.iter().map(|r| r.pair_id.clone()).collect();
    let mut pending: Vec<&LabeledPair> = pairs.iter().filter(|p| !done.contains(&p.pair_id)).collect();
    if let Some(limit) = config.max_pairs {
        pending.truncate(limit);
    }
    log::info!("run {run_id}: {} pairs done, {} to judge in this session", done.len(), pending.len());
    manifest.updated_at = now();
    manifest.save(&manifest_path)?;

    let model_ids = judge.model_ids();
    let mut provider_errors = Vec::new();
    let mut judged_now = 0;
    let next = AtomicUsize::new(0);
    let workers = config.concurrency.min(pending.len()).max(1);

    std::thread::scope(|scope| -> Result<(), HarnessError> {
        let (tx, rx) = mpsc::channel::<Finished>();
        for _ in 0..workers {
            let tx = tx.clone();
            let (pending, next, judge, log) = (&pending, &next, &judge, &log);
            scope.spawn(move || loop {
                let index = next.fetch_add(1, Ordering::SeqCst);
                let Some(pair) = pending.get(index) else { break };
                let started = Instant::now();
                let input = JudgeInput { pair_id: &pair.pair_id, user: &pair.user, system: &pair.system };
                let outcome = match judge.judge(input, Some(log)) {
                    Ok(o) => Outcome::Judged(o),
                    Err(f) => Outcome::Failed(f),
                };
                let finished = Finished { index, outcome, wall_ms: started.elapsed().as_millis() as u64 };
                if tx.send(finished).is_err() {
                    break;
                }
            });
        }
        drop(tx);

        // single writer: records, transcripts and manifest
        for finished in rx {
            let pair = pending[finished.index];
            if done.contains(&pair.pair_id) {
                continue;
            }
            let (verdict, error, usage, rounds_used, transcript, state) = match finished.outcome {
                Outcome::Judged(o) => (Some(o.verdict), None, o.usage, o.rounds_used, o.transcript, PairState::Done),
                Outcome::Failed(f) => {
                    let state = match f.error {
                        JudgeError::Provider(_) => PairState::ProviderError,
                        _ => PairState::JudgeFailure,
                    };
                    (None, Some(f.error.to_string()), f.usage, f.rounds_used, f.transcript, state)
                }
            };
            store.append_transcript(&TranscriptLine {
                pair_id: pair.pair_id.clone(),
                session: session.clone(),
                transcript,
            })?;
            if state == PairState::ProviderError {
                let error = error.clone().unwrap_or_default();
                log::warn!("{}: provider gave up: {error}", pair.pair_id);
                provider_errors.push(PairError { pair_id: pair.pair_id.clone(), error });
            } else {
                store.append_record(&EvaluationRecord {
                    run_id: run_id.clone(),
                    session: session.clone(),
                    pair_id: pair.pair_id.clone(),
                    strategy: config.strategy,
                    model_ids: model_ids.clone(),
                    label: pair.label,
                    verdict,
                    error: error.clone(),
                    calls: usage.calls,
                    input_tokens: usage.input_tokens,
                    output_tokens: usage.output_tokens,
                    latency_ms: finished.wall_ms,
                    cost_usd: usage.cost_usd,
                    rounds_used,
                    tokens_estimated: usage.tokens_estimated,
                    completed_at: now(),
                })?;
                done.insert(pair.pair_id.clone());
                judged_now += 1;
            }
            manifest.pairs.insert(
                pair.pair_id.clone(),
                PairStatus { state, session: session.clone(), updated_at: now(), error },
            );
            manifest.updated_at = now();
            manifest.save(&manifest_path)?;
        }
        Ok(())
    })?;

    let records = read_records(&dir.join(RECORDS))?;
    let attempts = RunLog::read(&dir.join(RUN_LOG)).map_err(io_err(&dir.join(RUN_LOG)))?;
    provider_errors.sort_by(|a, b| a.pair_id.cmp(&b.pair_id));
    let summary = RunSummary {
        run_id,
        run_dir: dir.clone(),
        strategy: config.strategy,
        model_ids,
        dataset_pairs: pairs.len(),
        records: records.len(),
        judged_now,
        complete: records.len() == pairs.len(),
        provider_errors,
        report: Report::from_records(&records),
        log_totals: run_log_totals(&records, &attempts, &costs)?,
    };
    let summary_path = dir.join(SUMMARY);
    std::fs::write(&summary_path, serde_json::to_string_pretty(&summary).expect("summaries serialize"))
        .map_err(io_err(&summary_path))?;
    Ok(summary)
}

/// Report recomputed from a run directory's records.
pub fn report_run(dir: &Path) -> Result<(Vec<EvaluationRecord>, Report), HarnessError> {
    let records = read_records(&dir.join(RECORDS))?;
    let report = Report::from_records(&records);
    Ok((records, report))
}
