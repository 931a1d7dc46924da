//! Worked examples for few-shot prompting.

use std::path::Path;

use chrono::Datelike;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::generator::{self, GeneratorConfig, UtteranceBackend, Vocabulary};
use crate::model::{format_minutes, is_open_at, ErrorCategory, Label, LabeledPair, SystemBlock, UserBlock};
use crate::oracle::{rating_satisfied, MAX_DRIVE_MINUTES};
use crate::travel::TravelTimeEstimator;

use super::prompt::weekday_name;

/// Seed for the shipped examples; distinct from the default dataset seed.
const SHOT_SEED: u64 = 7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkedExample {
    pub user: UserBlock,
    pub system: SystemBlock,
    pub reasoning: Vec<String>,
    pub decision: bool,
}

impl WorkedExample {
    /// The assistant turn shown after the example.
    pub fn answer(&self, with_confidence: bool) -> String {
        let mut value = json!({
            "decision": self.decision,
            "explanation": self.reasoning.join(" "),
        });
        if with_confidence {
            value["confidence"] = json!(1.0);
        }
        value.to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FewShotSet {
    pub examples: Vec<WorkedExample>,
}

impl FewShotSet {
    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn truncated(&self, n: usize) -> Self {
        Self { examples: self.examples.iter().take(n).cloned().collect() }
    }

    /// Loads a JSON list of worked examples.
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
    }

    /// Up to five shipped examples: a time error, an aligned pair, then
    /// location, rating and cost errors, each from a different request.
    pub fn default_set(n: usize) -> Self {
        let vocab = Vocabulary::default();
        let travel = TravelTimeEstimator::default();
        let config = GeneratorConfig { seed: SHOT_SEED, n_user_blocks: 5, ..GeneratorConfig::default() };
        let pairs = generator::assemble_dataset(&config, &UtteranceBackend::Template, &travel)
            .expect("template generation is infallible with the haversine estimator");
        let wanted = [
            Label::Incorrect { error: ErrorCategory::Time },
            Label::Correct,
            Label::Incorrect { error: ErrorCategory::Location },
            Label::Incorrect { error: ErrorCategory::Rating },
            Label::Incorrect { error: ErrorCategory::Cost },
        ];
        let examples = wanted
            .iter()
            .enumerate()
            .take(n)
            .map(|(i, label)| {
                let pair = pairs
                    .iter()
                    .find(|p| p.user.id == format!("u{i:03}") && p.label == *label)
                    .expect("every user block has all six labels");
                worked_example(pair, &travel, &vocab)
            })
            .collect();
        Self { examples }
    }
}

pub fn worked_example(pair: &LabeledPair, travel: &TravelTimeEstimator, vocab: &Vocabulary) -> WorkedExample {
    let reasoning = explain(&pair.user, &pair.system, travel, vocab);
    WorkedExample { user: pair.user.clone(), system: pair.system.clone(), reasoning, decision: pair.label.is_correct() }
}

/// One numbered reasoning step per rule, ending with the decision.
pub fn explain(user: &UserBlock, system: &SystemBlock, travel: &TravelTimeEstimator, vocab: &Vocabulary) -> Vec<String> {
    let verdict = |ok: bool| if ok { "CORRECT" } else { "INCORRECT" };
    let minutes = travel.estimate(&user.location, &system.location).unwrap_or(f64::INFINITY);
    let location_ok = minutes <= MAX_DRIVE_MINUTES;
    let weekday = weekday_name(user.date.weekday());
    let hours: Vec<String> = system
        .opening_hours
        .day(user.date.weekday())
        .iter()
        .map(|iv| format!("{}-{}", format_minutes(iv.open), format_minutes(iv.close)))
        .collect();
    let hours = if hours.is_empty() { "closed all day".to_string() } else { hours.join(", ") };
    let time_ok = is_open_at(&system.opening_hours, user.date, user.time);
    let cuisine_ok = system.cuisine == user.cuisine;
    let cost_ok = system.cost == user.cost;
    let rating_ok = rating_satisfied(&user.rating, system.rating);
    let all_ok = location_ok && time_ok && cuisine_ok && cost_ok && rating_ok;
    vec![
        format!(
            "1. Location: the venue is about {minutes:.1} minutes away by car; the limit is 15 minutes -> {}.",
            verdict(location_ok)
        ),
        format!(
            "2. Time: the request is for {weekday} at {}; on {weekday} the venue is open {hours} -> {}.",
            format_minutes(user.time),
            verdict(time_ok)
        ),
        format!(
            "3. Cuisine: requested {}, the venue serves {} -> {}.",
            vocab.cuisine_name(&user.cuisine),
            vocab.cuisine_name(&system.cuisine),
            verdict(cuisine_ok)
        ),
        format!(
            "4. Cost: \"{}\" means a {} price level; the venue is {} -> {}.",
            user.cost_paraphrase,
            user.cost,
            system.cost,
            verdict(cost_ok)
        ),
        format!(
            "5. Rating: requested {}, the venue has {:.1} -> {}.",
            user.rating.phrase().trim_start_matches("a rating "),
            system.rating,
            verdict(rating_ok)
        ),
        format!("Decision: {}.", if all_ok { "true" } else { "false" }),
    ]
}
