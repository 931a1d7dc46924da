//! On-disk layout of a run directory.
//!
//! ```text
//! <out_dir>/<run_id>/
//!   manifest.json      config snapshot and per-pair status, replaced atomically
//!   records.jsonl      one EvaluationRecord per judged pair (source of truth)
//!   transcripts.jsonl  full call transcripts per pair
//!   run_log.jsonl      every provider attempt
//!   summary.json       written when a session ends
//! ```

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::judge::TranscriptEntry;
use crate::metrics::EvaluationRecord;

use super::{HarnessError, RunConfig};

pub const MANIFEST: &str = "manifest.json";
pub const RECORDS: &str = "records.jsonl";
pub const TRANSCRIPTS: &str = "transcripts.jsonl";
pub const RUN_LOG: &str = "run_log.jsonl";
pub const SUMMARY: &str = "summary.json";

pub(crate) fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io { path: path.display().to_string(), source }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairState {
    Done,
    /// Recorded as a judge failure; counts as a wrong judgment.
    JudgeFailure,
    /// Provider retries exhausted; no record, retried on resume.
    ProviderError,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairStatus {
    pub state: PairState,
    pub session: String,
    pub updated_at: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub run_id: String,
    pub created_at: String,
    pub updated_at: String,
    pub dataset_sha256: String,
    pub config: RunConfig,
    pub sessions: Vec<String>,
    pub pairs: BTreeMap<String, PairStatus>,
}

impl RunManifest {
    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        serde_json::from_str(&text).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))
    }

    /// Write-then-rename so readers never see a partial manifest.
    pub fn save(&self, path: &Path) -> Result<(), HarnessError> {
        let tmp = path.with_extension("json.tmp");
        let text = serde_json::to_string_pretty(self).expect("manifests serialize");
        std::fs::write(&tmp, text).map_err(io_err(&tmp))?;
        std::fs::rename(&tmp, path).map_err(io_err(path))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptLine {
    pub pair_id: String,
    pub session: String,
    pub transcript: Vec<TranscriptEntry>,
}

/// Drops a torn trailing line left by an interrupted writer.
fn repair_tail(path: &Path) -> Result<(), HarnessError> {
    let Ok(text) = std::fs::read_to_string(path) else { return Ok(()) };
    if text.is_empty() || text.ends_with('\n') {
        return Ok(());
    }
    let keep = text.rfind('\n').map_or(0, |i| i + 1);
    log::warn!("{}: dropping torn trailing line", path.display());
    let file = OpenOptions::new().write(true).open(path).map_err(io_err(path))?;
    file.set_len(keep as u64).map_err(io_err(path))
}

/// Reads persisted records.
pub fn read_records(path: &Path) -> Result<Vec<EvaluationRecord>, HarnessError> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    let lines: Vec<&str> = text.lines().collect();
    let mut records = Vec::with_capacity(lines.len());
    for (i, line) in lines.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str(line) {
            Ok(r) => records.push(r),
            // an unterminated last line is an interrupted write, not corruption
            Err(_) if i + 1 == lines.len() && !text.ends_with('\n') => break,
            Err(e) => return Err(HarnessError::Config(format!("{} line {}: {e}", path.display(), i + 1))),
        }
    }
    Ok(records)
}

/// Append-only writers for one session; owned by the single writer thread.
pub(crate) struct RunStore {
    pub dir: PathBuf,
    records: File,
    transcripts: File,
}

impl RunStore {
    pub fn open(dir: &Path) -> Result<Self, HarnessError> {
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
        let open = |name: &str| -> Result<File, HarnessError> {
            let path = dir.join(name);
            repair_tail(&path)?;
            OpenOptions::new().create(true).append(true).open(&path).map_err(io_err(&path))
        };
        Ok(Self { dir: dir.to_path_buf(), records: open(RECORDS)?, transcripts: open(TRANSCRIPTS)? })
    }

    pub fn append_record(&mut self, record: &EvaluationRecord) -> Result<(), HarnessError> {
        let line = serde_json::to_string(record).expect("records serialize");
        writeln!(self.records, "{line}").and_then(|_| self.records.flush()).map_err(io_err(&self.dir.join(RECORDS)))
    }

    pub fn append_transcript(&mut self, line: &TranscriptLine) -> Result<(), HarnessError> {
        let text = serde_json::to_string(line).expect("transcripts serialize");
        writeln!(self.transcripts, "{text}").map_err(io_err(&self.dir.join(TRANSCRIPTS)))
    }
}
