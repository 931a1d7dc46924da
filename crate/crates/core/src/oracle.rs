//! Rule-based ground-truth judge.
//!
//! A recommendation is wrong in a dimension when:
//! - location: estimated drive strictly longer than 15 minutes
//! - time: the venue is closed at the requested date and time
//! - cost / cuisine: categorical mismatch
//! - rating: below the requested value, or for "around" requests more than
//!   0.2 away from it

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::model::{is_open_at, ErrorCategory, Label, RatingExpression, RatingKind, SystemBlock, UserBlock};
use crate::travel::{TravelError, TravelTimeEstimator};

pub const MAX_DRIVE_MINUTES: f64 = 15.0;
pub const AROUND_TOLERANCE: f64 = 0.2;

// Ratings carry one decimal; this absorbs binary representation noise such as 4.2 - 4.0 = 0.20000000000000018.
const RATING_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OracleVerdict {
    pub correct: bool,
    pub violations: BTreeSet<ErrorCategory>,
}

impl OracleVerdict {
    pub fn from_violations(violations: BTreeSet<ErrorCategory>) -> Self {
        Self { correct: violations.is_empty(), violations }
    }

    /// The label this verdict implies when at most one dimension is violated.
    pub fn as_label(&self) -> Option<Label> {
        let mut it = self.violations.iter();
        match (it.next(), it.next()) {
            (None, _) => Some(Label::Correct),
            (Some(&error), None) => Some(Label::Incorrect { error }),
            _ => None,
        }
    }

    /// Whether this verdict agrees with a dataset label.
    pub fn matches(&self, label: Label) -> bool {
        self.as_label() == Some(label)
    }
}

pub fn rating_satisfied(expr: &RatingExpression, rating: f64) -> bool {
    match expr.kind {
        RatingKind::AtLeast | RatingKind::Above => rating >= expr.value - RATING_EPS,
        RatingKind::Around => (rating - expr.value).abs() <= AROUND_TOLERANCE + RATING_EPS,
    }
}

pub fn judge_pair(
    user: &UserBlock,
    system: &SystemBlock,
    travel: &TravelTimeEstimator,
) -> Result<OracleVerdict, TravelError> {
    let mut violations = BTreeSet::new();
    if travel.estimate(&user.location, &system.location)? > MAX_DRIVE_MINUTES {
        violations.insert(ErrorCategory::Location);
    }
    if !is_open_at(&system.opening_hours, user.date, user.time) {
        violations.insert(ErrorCategory::Time);
    }
    if system.cuisine != user.cuisine {
        violations.insert(ErrorCategory::Cuisine);
    }
    if system.cost != user.cost {
        violations.insert(ErrorCategory::Cost);
    }
    if !rating_satisfied(&user.rating, system.rating) {
        violations.insert(ErrorCategory::Rating);
    }
    Ok(OracleVerdict::from_violations(violations))
}

#[cfg(test)]
pub(crate) mod fixtures {
    use chrono::NaiveDate;

    use crate::model::*;

    /// High-end French request on a Monday at 20:35 in Prenzlauer Berg.
    pub fn french_user() -> UserBlock {
        UserBlock {
            id: "u-fig".into(),
            utterance: "Hey, can you find me a high-end luxury French restaurant with a rating of at least 4.5?"
                .into(),
            location: GeoPoint::new(52.5389, 13.4244, "Prenzlauer Berg, Berlin"),
            date: NaiveDate::from_ymd_opt(2024, 3, 4).unwrap(),
            time: 20 * 60 + 35,
            cuisine: "french".into(),
            cuisine_lexical: "French".into(),
            cost: CostCategory::High,
            cost_paraphrase: "high-end luxury prices".into(),
            rating: RatingExpression::new(RatingKind::AtLeast, 4.5),
        }
    }

    pub fn aligned_venue() -> SystemBlock {
        SystemBlock {
            venue_name: "Maison Lumière".into(),
            location: GeoPoint::new(52.5402, 13.4190, "Prenzlauer Berg, Berlin"),
            cuisine: "french".into(),
            cost: CostCategory::High,
            rating: 4.6,
            opening_hours: OpeningHours::uniform(vec![Interval::new(720, 1440)]),
        }
    }

    pub fn pair() -> LabeledPair {
        LabeledPair::new("u-fig-correct", french_user(), aligned_venue(), Label::Correct)
    }
}
