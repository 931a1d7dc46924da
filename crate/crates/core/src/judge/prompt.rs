//! Prompt rendering for every protocol, and the reverse mapping used by
//! mock judges to recover the blocks under test from a request.

use std::collections::BTreeMap;

use chrono::{Datelike, NaiveDate, Weekday};
use serde::{Deserialize, Serialize};

use crate::generator::Vocabulary;
use crate::model::{
    format_minutes, parse_minutes, GeoPoint, Interval, OpeningHours, RatingExpression, RatingKind, SystemBlock,
    UserBlock, Verdict, WEEKDAYS,
};
use crate::provider::{ChatRequest, Message, Role};

use super::shots::FewShotSet;
use super::{JudgeError, Persona, StrategyKind, StrategySpec};

pub const USER_BLOCK_MARKER: &str = "User Block: ";
pub const RECOMMENDATION_MARKER: &str = "Recommendation: ";

const PREAMBLE: &str = "You are a critical evaluator tasked with determining whether the information provided by a \
car navigation system (System Block) aligns correctly with the user's expressed needs in user utterance and user \
context (User Block).";

const RULES: &str = "\
- Location: the venue must be reachable within a 15-minute drive of the user's location. A drive of more than 15 minutes is INCORRECT.
- Time: the venue must be open on the requested weekday at the requested time. A venue that is closed then is INCORRECT.
- Cuisine: the venue's cuisine must match the requested cuisine.
- Cost: the venue's cost level (low, medium or high) must match the price level the user expressed.
- Rating: the venue's rating must satisfy the requested rating. For requests such as \"around X\", a rating more than 0.2 away from X is INCORRECT.";

const DECISION: &str = "Decision: If any of the above parameters are INCORRECT, the final decision is 'false'. If all \
parameters are CORRECT, the final decision is 'true'.";

const STEP_BY_STEP: &str =
    "Think step by step: check location, time, cuisine, cost and rating one after another before deciding.";

/// User block as shown to a judge: utterance and context, with the cost
/// preference only in the user's own words.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserBlockView {
    pub utterance: String,
    pub location: GeoPoint,
    pub date: NaiveDate,
    pub weekday: String,
    pub time: String,
    pub cuisine: String,
    pub cost: String,
    pub rating: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemBlockView {
    pub venue_name: String,
    pub location: GeoPoint,
    pub cuisine: String,
    pub cost: String,
    pub rating: f64,
    /// Weekday name to `HH:MM-HH:MM` ranges; an empty list means closed.
    pub opening_hours: BTreeMap<String, Vec<String>>,
}

pub fn weekday_name(day: Weekday) -> &'static str {
    match day {
        Weekday::Mon => "Monday",
        Weekday::Tue => "Tuesday",
        Weekday::Wed => "Wednesday",
        Weekday::Thu => "Thursday",
        Weekday::Fri => "Friday",
        Weekday::Sat => "Saturday",
        Weekday::Sun => "Sunday",
    }
}

fn rating_text(expr: &RatingExpression) -> String {
    match expr.kind {
        RatingKind::AtLeast => format!("at least {:.1}", expr.value),
        RatingKind::Above => format!("above {:.1}", expr.value),
        RatingKind::Around => format!("around {:.1}", expr.value),
    }
}

fn parse_rating_text(text: &str) -> Option<RatingExpression> {
    let text = text.trim();
    let (kind, rest) = if let Some(rest) = text.strip_prefix("at least ") {
        (RatingKind::AtLeast, rest)
    } else if let Some(rest) = text.strip_prefix("above ") {
        (RatingKind::Above, rest)
    } else {
        (RatingKind::Around, text.strip_prefix("around ")?)
    };
    Some(RatingExpression::new(kind, rest.trim().parse().ok()?))
}

impl UserBlockView {
    pub fn new(user: &UserBlock, vocab: &Vocabulary) -> Self {
        Self {
            utterance: user.utterance.clone(),
            location: user.location.clone(),
            date: user.date,
            weekday: weekday_name(user.date.weekday()).to_string(),
            time: format_minutes(user.time),
            cuisine: vocab.cuisine_name(&user.cuisine).to_string(),
            cost: user.cost_paraphrase.clone(),
            rating: rating_text(&user.rating),
        }
    }

    /// Rebuilds the judgeable part of a user block; lexical fields are left as shown.
    pub fn to_user_block(&self, vocab: &Vocabulary) -> Result<UserBlock, String> {
        let time = parse_minutes(&self.time).ok_or_else(|| format!("bad time {:?}", self.time))?;
        let cost = vocab.cost_of_paraphrase(&self.cost).ok_or_else(|| format!("unknown cost phrase {:?}", self.cost))?;
        let rating = parse_rating_text(&self.rating).ok_or_else(|| format!("bad rating {:?}", self.rating))?;
        let cuisine = vocab.cuisine_id(&self.cuisine).unwrap_or(&self.cuisine).to_string();
        Ok(UserBlock {
            id: String::new(),
            utterance: self.utterance.clone(),
            location: self.location.clone(),
            date: self.date,
            time,
            cuisine_lexical: self.cuisine.clone(),
            cuisine,
            cost,
            cost_paraphrase: self.cost.clone(),
            rating,
        })
    }
}

impl SystemBlockView {
    pub fn new(system: &SystemBlock, vocab: &Vocabulary) -> Self {
        let opening_hours = WEEKDAYS
            .iter()
            .map(|&day| {
                let ranges = system
                    .opening_hours
                    .day(day)
                    .iter()
                    .map(|iv| format!("{}-{}", format_minutes(iv.open), format_minutes(iv.close)))
                    .collect();
                (weekday_name(day).to_string(), ranges)
            })
            .collect();
        Self {
            venue_name: system.venue_name.clone(),
            location: system.location.clone(),
            cuisine: vocab.cuisine_name(&system.cuisine).to_string(),
            cost: system.cost.as_str().to_string(),
            rating: system.rating,
            opening_hours,
        }
    }

    pub fn to_system_block(&self, vocab: &Vocabulary) -> Result<SystemBlock, String> {
        let cost = serde_json::from_value(serde_json::Value::String(self.cost.clone()))
            .map_err(|_| format!("bad cost {:?}", self.cost))?;
        let mut hours = OpeningHours::default();
        for day in WEEKDAYS {
            let Some(ranges) = self.opening_hours.get(weekday_name(day)) else { continue };
            for range in ranges {
                let (open, close) = range.split_once('-').ok_or_else(|| format!("bad range {range:?}"))?;
                let open = parse_minutes(open).ok_or_else(|| format!("bad range {range:?}"))?;
                let close = parse_minutes(close).ok_or_else(|| format!("bad range {range:?}"))?;
                hours.day_mut(day).push(Interval::new(open, close));
            }
        }
        Ok(SystemBlock {
            venue_name: self.venue_name.clone(),
            location: self.location.clone(),
            cuisine: vocab.cuisine_id(&self.cuisine).unwrap_or(&self.cuisine).to_string(),
            cost,
            rating: self.rating,
            opening_hours: hours,
        })
    }
}

/// `User Block:` and `Recommendation:` lines for one pair.
pub fn render_blocks(user: &UserBlock, system: &SystemBlock, vocab: &Vocabulary) -> String {
    let user = serde_json::to_string(&UserBlockView::new(user, vocab)).expect("views serialize");
    let system = serde_json::to_string(&SystemBlockView::new(system, vocab)).expect("views serialize");
    format!("{USER_BLOCK_MARKER}{user}\n\n{RECOMMENDATION_MARKER}{system}")
}

pub fn output_format(kind: StrategyKind) -> String {
    let explanation = if kind.uses_reasoning() {
        "<step-by-step reasoning covering location, time, cuisine, cost and rating>"
    } else {
        "<brief justification>"
    };
    if kind.elicits_confidence() {
        format!(
            "{{\"decision\": true or false, \"explanation\": \"{explanation}\", \"confidence\": <number between 0.0 and 1.0 stating how certain you are that your decision is correct>}}"
        )
    } else {
        format!("{{\"decision\": true or false, \"explanation\": \"{explanation}\"}}")
    }
}

/// The full evaluation prompt for the pair under test.
pub fn render_target(kind: StrategyKind, user: &UserBlock, system: &SystemBlock, vocab: &Vocabulary) -> String {
    let mut text = format!(
        "{PREAMBLE}\n\n{}\n\nRules:\n{RULES}\n\n{DECISION}\n\n",
        render_blocks(user, system, vocab)
    );
    if kind.uses_reasoning() {
        text.push_str(STEP_BY_STEP);
        text.push_str("\n\n");
    }
    text.push_str("Please respond strictly following the format specified below:\n");
    text.push_str(&output_format(kind));
    text.push_str("\n\nMake sure the output is always a valid JSON format.");
    text
}

/// Builds the request for one agent's first-round call.
pub fn render_prompt(
    spec: &StrategySpec,
    model_id: &str,
    user: &UserBlock,
    system: &SystemBlock,
    persona: Option<&Persona>,
    shots: Option<&FewShotSet>,
    vocab: &Vocabulary,
) -> Result<ChatRequest, JudgeError> {
    if spec.kind.is_persona_panel() && persona.is_none() {
        return Err(JudgeError::MissingAttachment(format!("{} requires a persona", spec.kind)));
    }
    let wanted_shots = spec.kind.shot_count();
    let mut messages = Vec::new();
    if let Some(persona) = persona {
        messages.push(Message::system(persona.system_prompt.clone()));
    }
    if wanted_shots > 0 {
        let shots = shots
            .ok_or_else(|| JudgeError::MissingAttachment(format!("{} requires {wanted_shots} worked examples", spec.kind)))?;
        if shots.len() < wanted_shots {
            return Err(JudgeError::MissingAttachment(format!(
                "{} requires {wanted_shots} worked examples, {} supplied",
                spec.kind,
                shots.len()
            )));
        }
        for (i, example) in shots.examples.iter().take(wanted_shots).enumerate() {
            messages.push(Message::user(format!(
                "Worked example {}:\n{}",
                i + 1,
                render_blocks(&example.user, &example.system, vocab)
            )));
            messages.push(Message::assistant(example.answer(spec.kind.elicits_confidence())));
        }
    }
    messages.push(Message::user(render_target(spec.kind, user, system, vocab)));
    let mut request = ChatRequest::new(model_id, messages);
    request.temperature = spec.temperature;
    Ok(request)
}

/// A labelled previous-round answer from another participant.
pub struct PeerAnswer<'a> {
    pub name: &'a str,
    pub verdict: &'a Verdict,
}

/// Follow-up turn for a debate round: the agent's own previous answer, then its peers'.
pub fn discussion_turn(
    base: &ChatRequest,
    own_previous: &str,
    peers: &[PeerAnswer<'_>],
    kind: StrategyKind,
) -> ChatRequest {
    let mut request = base.clone();
    request.messages.push(Message::assistant(own_previous.to_string()));
    let mut text = String::from("The other participants answered as follows in the previous round:\n");
    for peer in peers {
        let json = serde_json::to_string(peer.verdict).expect("verdicts serialize");
        text.push_str(&format!("- {}: {json}\n", peer.name));
    }
    text.push_str(
        "\nConsider their reasoning, re-check every parameter against the rules and give your updated decision. \
Respond strictly in the same format:\n",
    );
    text.push_str(&output_format(kind));
    request.messages.push(Message::user(text));
    request
}

/// The last user/recommendation block pair carried by a request, with
/// whether its output format asks for a confidence value.
pub fn extract_target(request: &ChatRequest, vocab: &Vocabulary) -> Result<(UserBlock, SystemBlock, bool), String> {
    let message = request
        .messages
        .iter()
        .rev()
        .filter(|m| m.role == Role::User)
        .find(|m| m.content.contains(USER_BLOCK_MARKER))
        .ok_or("request carries no user block")?;
    let line_after = |marker: &str| -> Result<&str, String> {
        let start = message.content.rfind(marker).ok_or(format!("missing {marker:?}"))? + marker.len();
        Ok(message.content[start..].lines().next().unwrap_or_default())
    };
    let user: UserBlockView = serde_json::from_str(line_after(USER_BLOCK_MARKER)?).map_err(|e| e.to_string())?;
    let system: SystemBlockView =
        serde_json::from_str(line_after(RECOMMENDATION_MARKER)?).map_err(|e| e.to_string())?;
    let wants_confidence = request
        .messages
        .iter()
        .rev()
        .find(|m| m.role == Role::User)
        .is_some_and(|m| m.content.contains("\"confidence\""));
    Ok((user.to_user_block(vocab)?, system.to_system_block(vocab)?, wants_confidence))
}
