//! Verdict aggregation: plain majority and confidence-weighted voting.

use serde::{Deserialize, Serialize};

/// Most frequent verdict. Even splits, and the empty list, resolve to `false`.
pub fn aggregate_mode(verdicts: &[bool]) -> bool {
    let yes = verdicts.iter().filter(|&&v| v).count();
    yes * 2 > verdicts.len()
}

/// Piecewise map from elicited confidence to voting weight.
///
/// Buckets are `(lower bound, weight)`, checked from the highest bound down;
/// anything below every bound gets `floor`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationTable {
    pub buckets: Vec<(f64, f64)>,
    pub floor: f64,
}

impl Default for CalibrationTable {
    fn default() -> Self {
        Self { buckets: vec![(1.0, 1.0), (0.9, 0.8), (0.8, 0.5), (0.6, 0.3)], floor: 0.1 }
    }
}

impl CalibrationTable {
    pub fn weight(&self, confidence: f64) -> f64 {
        self.buckets
            .iter()
            .find(|(lower, _)| confidence >= *lower)
            .map(|&(_, w)| w)
            .unwrap_or(self.floor)
    }
}

/// Weighted vote over `(verdict, confidence)`; a missing confidence falls in the lowest bucket.
///
/// Returns the winning verdict and its share of the total weight. Ties go to `false`.
pub fn confidence_weighted_vote(votes: &[(bool, Option<f64>)], table: &CalibrationTable) -> (bool, f64) {
    let (mut yes, mut no) = (0.0, 0.0);
    for &(decision, confidence) in votes {
        let w = table.weight(confidence.unwrap_or(0.0));
        if decision {
            yes += w;
        } else {
            no += w;
        }
    }
    let total = yes + no;
    let decision = yes > no;
    let winning = if decision { yes } else { no };
    (decision, if total > 0.0 { winning / total } else { 0.0 })
}
