//! Synthetic dataset generation.
//!
//! For every user request the generator builds one fully aligned
//! recommendation and five recommendations that each break exactly one
//! dimension (location, time, cuisine, cost, rating) while copying every
//! other field from the aligned one.
//!
//! Each user block and each case draws from its own ChaCha stream derived
//! from `(seed, user index, case)`, so output does not depend on
//! scheduling and any single case can be regenerated in isolation.

mod vocabulary;

use std::collections::BTreeSet;
use std::sync::Arc;

use chrono::{Datelike, Duration, NaiveDate, Weekday};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use vocabulary::{Cuisine, VenueNameParts, Vocabulary};

use crate::judge::prompt::SystemBlockView;
use crate::judge::verdict::parse_verdict;
use crate::model::{
    CostCategory, ErrorCategory, GeoPoint, Interval, Label, LabeledPair, OpeningHours, RatingKind, SystemBlock,
    UserBlock, MINUTES_PER_DAY, WEEKDAYS,
};
use crate::oracle::{judge_pair, MAX_DRIVE_MINUTES};
use crate::provider::{complete, ChatProvider, ChatRequest, Message, RetryPolicy};
use crate::travel::{destination_point, TravelError, TravelTimeEstimator};

/// Shipped default seed. The coverage check in the tests is pinned to it.
pub const DEFAULT_SEED: u64 = 2024;

#[derive(Debug, Error)]
pub enum GenerationError {
    #[error("invalid generator config: {0}")]
    InvalidConfig(String),
    #[error("utterance backend failed for user block {index}: {reason}")]
    BackendFailure { index: usize, reason: String },
    #[error("could not produce an aligned recommendation for {user_id} after {attempts} attempts")]
    AlignmentFailure { user_id: String, attempts: u32 },
    #[error("could not produce a {error} error for {user_id} after {attempts} attempts")]
    ExhaustedRetries { user_id: String, error: ErrorCategory, attempts: u32 },
    #[error(transparent)]
    Travel(#[from] TravelError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeneratorConfig {
    pub seed: u64,
    pub n_user_blocks: usize,
    pub vocabulary: Vocabulary,
    /// Inclusive date range.
    pub date_range: (NaiveDate, NaiveDate),
    /// Inclusive request-time range in minutes since midnight.
    pub time_range: (u16, u16),
    /// Low-cost requests never ask for more than this rating.
    pub max_rating_for_low_cost: f64,
    /// Attempts allowed for the location-error regeneration loop.
    pub location_retry_budget: u32,
    /// Attempts allowed for a model-backed case before giving up.
    pub model_retry_budget: u32,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            seed: DEFAULT_SEED,
            n_user_blocks: 100,
            vocabulary: Vocabulary::default(),
            date_range: (
                NaiveDate::from_ymd_opt(2024, 1, 1).unwrap(),
                NaiveDate::from_ymd_opt(2024, 12, 31).unwrap(),
            ),
            time_range: (8 * 60, 22 * 60),
            max_rating_for_low_cost: 4.4,
            location_retry_budget: 25,
            model_retry_budget: 3,
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<(), GenerationError> {
        self.vocabulary.validate().map_err(GenerationError::InvalidConfig)?;
        let (from, to) = self.date_range;
        if from > to {
            return Err(GenerationError::InvalidConfig("date range is empty".into()));
        }
        let (start, end) = self.time_range;
        if start > end || end >= MINUTES_PER_DAY {
            return Err(GenerationError::InvalidConfig(format!("bad time range {start}..={end}")));
        }
        for cost in CostCategory::ALL {
            if self.rating_pool(cost).is_empty() {
                return Err(GenerationError::InvalidConfig(format!("no rating phrase fits cost `{cost}`")));
            }
        }
        if self.location_retry_budget == 0 || self.model_retry_budget == 0 {
            return Err(GenerationError::InvalidConfig("retry budgets must be at least 1".into()));
        }
        Ok(())
    }

    /// Rating expressions compatible with a cost level.
    pub fn rating_pool(&self, cost: CostCategory) -> Vec<crate::model::RatingExpression> {
        self.vocabulary
            .rating_phrases
            .iter()
            .filter(|r| cost != CostCategory::Low || r.value <= self.max_rating_for_low_cost + 1e-9)
            .copied()
            .collect()
    }
}

/// Where utterances and recommendations come from.
#[derive(Clone)]
pub enum UtteranceBackend {
    /// Deterministic sentence frames and direct construction from preferences.
    Template,
    /// A chat model asked to write utterances and recommendations.
    Model { provider: Arc<dyn ChatProvider>, retry: RetryPolicy },
}

impl std::fmt::Debug for UtteranceBackend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            UtteranceBackend::Template => f.write_str("Template"),
            UtteranceBackend::Model { provider, .. } => write!(f, "Model({})", provider.model_id()),
        }
    }
}

/// Case slots within one user block's stream family.
#[derive(Clone, Copy)]
enum Slot {
    User,
    Positive,
    Error(ErrorCategory),
}

fn case_rng(seed: u64, index: usize, slot: Slot) -> ChaCha8Rng {
    let offset = match slot {
        Slot::User => 0,
        Slot::Positive => 1,
        Slot::Error(e) => 2 + ErrorCategory::ALL.iter().position(|&c| c == e).unwrap() as u64,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64 * 8 + offset);
    rng
}

fn user_id(index: usize) -> String {
    format!("u{index:03}")
}

fn index_of(user: &UserBlock) -> usize {
    user.id.trim_start_matches('u').parse().unwrap_or(0)
}

fn tenths(rating: f64) -> i32 {
    (rating * 10.0).round() as i32
}

fn from_tenths(t: i32) -> f64 {
    f64::from(t) / 10.0
}

// ---------------------------------------------------------------------------
// user blocks

pub fn generate_user_block(
    config: &GeneratorConfig,
    index: usize,
    backend: &UtteranceBackend,
) -> Result<UserBlock, GenerationError> {
    let vocab = &config.vocabulary;
    let mut rng = case_rng(config.seed, index, Slot::User);

    let location = vocab.locations.choose(&mut rng).expect("validated").clone();
    let (from, to) = config.date_range;
    let span = (to - from).num_days();
    let date = from + Duration::days(rng.random_range(0..=span));
    let time = rng.random_range(config.time_range.0..=config.time_range.1);
    let cuisine = vocab.cuisines.choose(&mut rng).expect("validated");
    let cuisine_lexical = cuisine.variants.choose(&mut rng).expect("validated").clone();
    let cost = *CostCategory::ALL.choose(&mut rng).unwrap();
    let cost_paraphrase = vocab.cost_paraphrases[&cost].choose(&mut rng).expect("validated").clone();
    let rating = *config.rating_pool(cost).choose(&mut rng).expect("validated");

    let utterance = match backend {
        UtteranceBackend::Template => {
            let frames = &vocab.utterance_frames;
            let frame = &frames[(config.seed as usize).wrapping_add(index) % frames.len()];
            fill_frame(frame, &cuisine_lexical, &cost_paraphrase, &rating.phrase())
        }
        UtteranceBackend::Model { provider, retry } => {
            model_utterance(config, index, provider.as_ref(), retry, &cuisine_lexical, &cost_paraphrase, &rating.phrase())?
        }
    };

    Ok(UserBlock {
        id: user_id(index),
        utterance,
        location,
        date,
        time,
        cuisine: cuisine.id.clone(),
        cuisine_lexical,
        cost,
        cost_paraphrase,
        rating,
    })
}

fn fill_frame(frame: &str, cuisine: &str, cost: &str, rating: &str) -> String {
    frame.replace("{cuisine}", cuisine).replace("{cost}", cost).replace("{rating}", rating)
}

fn model_utterance(
    config: &GeneratorConfig,
    index: usize,
    provider: &dyn ChatProvider,
    retry: &RetryPolicy,
    cuisine: &str,
    cost: &str,
    rating: &str,
) -> Result<String, GenerationError> {
    let prompt = format!(
        "Write one short, natural request that a driver might say to an in-car voice assistant when looking for a \
restaurant. It must contain these exact phrases: \"{cuisine}\", \"{cost}\" and \"{rating}\". \
Reply with the request only."
    );
    let request = ChatRequest::new(provider.model_id(), vec![Message::user(prompt)]);
    let mut last = String::new();
    for _ in 0..config.model_retry_budget {
        let completion = complete(provider, &request, retry, None, &user_id(index))
            .map_err(|e| GenerationError::BackendFailure { index, reason: e.to_string() })?;
        let text = completion.response.content.trim().trim_matches('"').to_string();
        let lower = text.to_lowercase();
        if [cuisine, cost, rating].iter().all(|p| lower.contains(&p.to_lowercase())) {
            return Ok(text);
        }
        last = text;
    }
    Err(GenerationError::BackendFailure { index, reason: format!("utterance misses required phrases: {last:?}") })
}

pub fn generate_user_blocks(
    config: &GeneratorConfig,
    backend: &UtteranceBackend,
) -> Result<Vec<UserBlock>, GenerationError> {
    config.validate()?;
    (0..config.n_user_blocks).into_par_iter().map(|i| generate_user_block(config, i, backend)).collect()
}

// ---------------------------------------------------------------------------
// aligned recommendations

fn venue_name(vocab: &Vocabulary, rng: &mut ChaCha8Rng) -> String {
    let parts = &vocab.venue_name_parts;
    format!("{} {}", parts.first.choose(rng).unwrap(), parts.second.choose(rng).unwrap())
}

fn aligned_rating(user: &UserBlock, rng: &mut ChaCha8Rng) -> f64 {
    let v = tenths(user.rating.value);
    let (lo, hi) = match user.rating.kind {
        RatingKind::AtLeast => (v, 50),
        RatingKind::Above => ((v + 1).min(50), 50),
        RatingKind::Around => ((v - 2).max(0), (v + 2).min(50)),
    };
    from_tenths(rng.random_range(lo.min(hi)..=hi))
}

fn floor_hour(minute: u16) -> u16 {
    minute / 60 * 60
}

fn aligned_hours(user: &UserBlock, rng: &mut ChaCha8Rng) -> OpeningHours {
    const OPENS: [u16; 6] = [480, 600, 660, 690, 720, 1020];
    const CLOSES: [u16; 4] = [1260, 1320, 1380, 1440];
    let requested = user.date.weekday();
    let rest_day = WEEKDAYS[rng.random_range(0..WEEKDAYS.len())];
    let has_rest_day = rng.random_bool(0.4);
    let split = rng.random_bool(0.25);
    let open = *OPENS.choose(rng).unwrap();
    let close = *CLOSES.choose(rng).unwrap();

    let mut hours = OpeningHours::default();
    for day in WEEKDAYS {
        if has_rest_day && day == rest_day && day != requested {
            continue;
        }
        *hours.day_mut(day) = if split && open < 690 {
            vec![Interval::new(open.max(660), 870), Interval::new(1050, close)]
        } else {
            vec![Interval::new(open, close)]
        };
    }
    // the requested day gets one interval that certainly covers the request
    let day_open = open.min(floor_hour(user.time));
    let day_close = close.max((floor_hour(user.time) + 120).min(MINUTES_PER_DAY));
    *hours.day_mut(requested) = vec![Interval::new(day_open, day_close)];
    hours
}

fn nearby_point(user: &UserBlock, rng: &mut ChaCha8Rng) -> GeoPoint {
    let bearing = rng.random_range(0.0..360.0);
    let km = rng.random_range(0.3..3.0);
    let (lat, lon) = destination_point(&user.location, bearing, km);
    GeoPoint::new(round6(lat), round6(lon), user.location.district_label.clone())
}

fn round6(x: f64) -> f64 {
    (x * 1e6).round() / 1e6
}

fn violations(
    user: &UserBlock,
    system: &SystemBlock,
    travel: &TravelTimeEstimator,
) -> Result<BTreeSet<ErrorCategory>, GenerationError> {
    Ok(judge_pair(user, system, travel)?.violations)
}

/// The fully aligned recommendation for `user`.
pub fn generate_positive_case(
    config: &GeneratorConfig,
    user: &UserBlock,
    backend: &UtteranceBackend,
    travel: &TravelTimeEstimator,
) -> Result<SystemBlock, GenerationError> {
    let mut rng = case_rng(config.seed, index_of(user), Slot::Positive);
    match backend {
        UtteranceBackend::Template => {
            let mut block = SystemBlock {
                venue_name: venue_name(&config.vocabulary, &mut rng),
                location: nearby_point(user, &mut rng),
                cuisine: user.cuisine.clone(),
                cost: user.cost,
                rating: aligned_rating(user, &mut rng),
                opening_hours: aligned_hours(user, &mut rng),
            };
            for _ in 0..config.location_retry_budget {
                if violations(user, &block, travel)?.is_empty() {
                    return Ok(block);
                }
                block.location = nearby_point(user, &mut rng);
            }
            Err(GenerationError::AlignmentFailure { user_id: user.id.clone(), attempts: config.location_retry_budget })
        }
        UtteranceBackend::Model { provider, retry } => {
            let instruction = "The recommendation must satisfy every part of the request: within a 15-minute drive, \
open on the requested weekday at the requested time, the requested cuisine, the requested price level and a rating \
that satisfies the request.";
            for _ in 0..config.model_retry_budget {
                let Some(block) = model_block(config, user, provider.as_ref(), retry, instruction)? else { continue };
                if violations(user, &block, travel)?.is_empty() {
                    return Ok(block);
                }
            }
            Err(GenerationError::AlignmentFailure { user_id: user.id.clone(), attempts: config.model_retry_budget })
        }
    }
}

/// Asks the model for one recommendation; `None` when the reply does not parse.
fn model_block(
    config: &GeneratorConfig,
    user: &UserBlock,
    provider: &dyn ChatProvider,
    retry: &RetryPolicy,
    instruction: &str,
) -> Result<Option<SystemBlock>, GenerationError> {
    let vocab = &config.vocabulary;
    let view = crate::judge::prompt::UserBlockView::new(user, vocab);
    let example = SystemBlockView::new(
        &SystemBlock {
            venue_name: "Example Venue".into(),
            location: user.location.clone(),
            cuisine: user.cuisine.clone(),
            cost: user.cost,
            rating: user.rating.value,
            opening_hours: OpeningHours::uniform(vec![Interval::new(720, 1320)]),
        },
        vocab,
    );
    let prompt = format!(
        "You generate restaurant recommendations for an in-car assistant.\n\nUser request: {}\n\n{instruction}\n\n\
Reply with a single JSON object shaped like this example (cost is one of low, medium, high):\n{}",
        serde_json::to_string(&view).expect("views serialize"),
        serde_json::to_string(&example).expect("views serialize"),
    );
    let request = ChatRequest::new(provider.model_id(), vec![Message::user(prompt)]);
    let completion = complete(provider, &request, retry, None, &user.id)
        .map_err(|e| GenerationError::BackendFailure { index: index_of(user), reason: e.to_string() })?;
    let content = completion.response.content;
    let Some(start) = content.find('{') else { return Ok(None) };
    let mut stream = serde_json::Deserializer::from_str(&content[start..]).into_iter::<SystemBlockView>();
    let parsed = match stream.next() {
        Some(Ok(view)) => view.to_system_block(vocab).ok().filter(|b| b.validate().is_ok()),
        _ => None,
    };
    // a verdict-shaped reply is a common failure mode worth a log line
    if parsed.is_none() && parse_verdict(&content).is_ok() {
        log::debug!("model answered with a verdict instead of a recommendation for {}", user.id);
    }
    Ok(parsed)
}

// ---------------------------------------------------------------------------
// single-error recommendations

fn city_of(district_label: &str) -> &str {
    district_label.rsplit(',').next().map(str::trim).unwrap_or(district_label)
}

fn compass(bearing: f64) -> &'static str {
    const NAMES: [&str; 8] = ["Northern", "North-eastern", "Eastern", "South-eastern", "Southern", "South-western", "Western", "North-western"];
    NAMES[((bearing + 22.5).rem_euclid(360.0) / 45.0) as usize % 8]
}

fn distant_point(user: &UserBlock, rng: &mut ChaCha8Rng) -> GeoPoint {
    let bearing = rng.random_range(0.0..360.0);
    let km = rng.random_range(9.0..25.0);
    let (lat, lon) = destination_point(&user.location, bearing, km);
    let label = format!("{} outskirts, {}", compass(bearing), city_of(&user.location.district_label));
    GeoPoint::new(round6(lat), round6(lon), label)
}

fn ceil_hour_after(minute: u16) -> u16 {
    (minute / 60 + 1) * 60
}

/// Hours identical to `base` except that the requested slot is closed.
fn hours_excluding(base: &OpeningHours, user: &UserBlock) -> OpeningHours {
    let mut hours = base.clone();
    let day: Weekday = user.date.weekday();
    let t = user.time;
    let mut intervals = Vec::new();
    for iv in base.day(day) {
        if !iv.contains(t) {
            intervals.push(*iv);
            continue;
        }
        let early_close = floor_hour(t);
        let late_open = ceil_hour_after(t);
        if early_close > iv.open {
            intervals.push(Interval::new(iv.open, early_close));
        } else if late_open < iv.close {
            intervals.push(Interval::new(late_open, iv.close));
        }
    }
    *hours.day_mut(day) = intervals;
    hours
}

fn misaligned_rating(user: &UserBlock, base: f64, rng: &mut ChaCha8Rng) -> f64 {
    let v = tenths(user.rating.value);
    let candidates: Vec<i32> = match user.rating.kind {
        RatingKind::AtLeast | RatingKind::Above => ((v - 8).max(0)..v).collect(),
        RatingKind::Around => ((v - 8).max(0)..=(v - 3)).chain((v + 3)..=(v + 8).min(50)).collect(),
    };
    candidates.choose(rng).map(|&t| from_tenths(t)).unwrap_or(base)
}

/// Copies `base` and breaks exactly the `error` dimension.
pub fn generate_error_case(
    config: &GeneratorConfig,
    user: &UserBlock,
    base: &SystemBlock,
    error: ErrorCategory,
    backend: &UtteranceBackend,
    travel: &TravelTimeEstimator,
) -> Result<SystemBlock, GenerationError> {
    let mut rng = case_rng(config.seed, index_of(user), Slot::Error(error));
    let wanted = BTreeSet::from([error]);
    let budget = match (backend, error) {
        (_, ErrorCategory::Location) => config.location_retry_budget,
        (UtteranceBackend::Template, _) => 1,
        (UtteranceBackend::Model { .. }, _) => config.model_retry_budget,
    };
    for _ in 0..budget {
        let candidate = match backend {
            UtteranceBackend::Template => {
                let mut block = base.clone();
                match error {
                    ErrorCategory::Location => block.location = distant_point(user, &mut rng),
                    ErrorCategory::Time => block.opening_hours = hours_excluding(&base.opening_hours, user),
                    ErrorCategory::Cuisine => {
                        let others: Vec<_> = config.vocabulary.cuisines.iter().filter(|c| c.id != user.cuisine).collect();
                        block.cuisine = others.choose(&mut rng).expect("validated").id.clone();
                    }
                    ErrorCategory::Cost => {
                        let others: Vec<_> = CostCategory::ALL.into_iter().filter(|&c| c != user.cost).collect();
                        block.cost = *others.choose(&mut rng).unwrap();
                    }
                    ErrorCategory::Rating => block.rating = misaligned_rating(user, base.rating, &mut rng),
                }
                block
            }
            UtteranceBackend::Model { provider, retry } => {
                let instruction = format!(
                    "The recommendation must satisfy the request in every respect except one: its {} must NOT \
match the request{}.",
                    error,
                    if error == ErrorCategory::Location { " (more than a 15-minute drive away)" } else { "" }
                );
                match model_block(config, user, provider.as_ref(), retry, &instruction)? {
                    Some(generated) => restore_dimension(base, &generated, error),
                    None => continue,
                }
            }
        };
        if error == ErrorCategory::Location
            && travel.estimate(&user.location, &candidate.location)? <= MAX_DRIVE_MINUTES
        {
            continue;
        }
        if violations(user, &candidate, travel)? == wanted {
            return Ok(candidate);
        }
    }
    if error == ErrorCategory::Location {
        Err(GenerationError::ExhaustedRetries { user_id: user.id.clone(), error, attempts: budget })
    } else {
        Err(GenerationError::AlignmentFailure { user_id: user.id.clone(), attempts: budget })
    }
}

/// `block` with the fields of `dimension` taken from `source`.
pub fn restore_dimension(block: &SystemBlock, source: &SystemBlock, dimension: ErrorCategory) -> SystemBlock {
    let mut out = block.clone();
    match dimension {
        ErrorCategory::Location => out.location = source.location.clone(),
        ErrorCategory::Time => out.opening_hours = source.opening_hours.clone(),
        ErrorCategory::Cuisine => out.cuisine = source.cuisine.clone(),
        ErrorCategory::Cost => out.cost = source.cost,
        ErrorCategory::Rating => out.rating = source.rating,
    }
    out
}

pub fn pair_id(user: &UserBlock, label: Label) -> String {
    format!("{}-{}", user.id, label.slug())
}

/// Six labeled pairs for one user block: the aligned case, then one per error category.
pub fn generate_cases(
    config: &GeneratorConfig,
    user: &UserBlock,
    backend: &UtteranceBackend,
    travel: &TravelTimeEstimator,
) -> Result<Vec<LabeledPair>, GenerationError> {
    let base = generate_positive_case(config, user, backend, travel)?;
    let mut pairs = Vec::with_capacity(6);
    for error in ErrorCategory::ALL {
        let block = generate_error_case(config, user, &base, error, backend, travel)?;
        let label = Label::Incorrect { error };
        pairs.push(LabeledPair::new(pair_id(user, label), user.clone(), block, label));
    }
    pairs.insert(0, LabeledPair::new(pair_id(user, Label::Correct), user.clone(), base, Label::Correct));
    Ok(pairs)
}

/// The full dataset, ordered by user-block index.
pub fn assemble_dataset(
    config: &GeneratorConfig,
    backend: &UtteranceBackend,
    travel: &TravelTimeEstimator,
) -> Result<Vec<LabeledPair>, GenerationError> {
    config.validate()?;
    let per_user: Vec<Vec<LabeledPair>> = (0..config.n_user_blocks)
        .into_par_iter()
        .map(|i| {
            let user = generate_user_block(config, i, backend)?;
            generate_cases(config, &user, backend, travel)
        })
        .collect::<Result<_, _>>()?;
    Ok(per_user.into_iter().flatten().collect())
}
