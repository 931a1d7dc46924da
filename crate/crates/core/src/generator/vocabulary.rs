//! Versioned word lists behind the template generator.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::model::{CostCategory, GeoPoint, RatingExpression};

const DEFAULT_VOCABULARY: &str = include_str!("../../data/vocabulary.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cuisine {
    /// Canonical cuisine id, e.g. `japanese`.
    pub id: String,
    /// Lexical variants; the first is the plain cuisine name.
    pub variants: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VenueNameParts {
    pub first: Vec<String>,
    pub second: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vocabulary {
    pub version: String,
    pub locations: Vec<GeoPoint>,
    pub cuisines: Vec<Cuisine>,
    pub cost_paraphrases: BTreeMap<CostCategory, Vec<String>>,
    pub rating_phrases: Vec<RatingExpression>,
    pub utterance_frames: Vec<String>,
    pub venue_name_parts: VenueNameParts,
}

impl Default for Vocabulary {
    fn default() -> Self {
        serde_json::from_str(DEFAULT_VOCABULARY).expect("shipped vocabulary parses")
    }
}

impl Vocabulary {
    /// Canonical paraphrase table lookup (case-insensitive).
    pub fn cost_of_paraphrase(&self, paraphrase: &str) -> Option<CostCategory> {
        let needle = paraphrase.trim().to_lowercase();
        self.cost_paraphrases
            .iter()
            .find(|(_, list)| list.iter().any(|p| p.to_lowercase() == needle))
            .map(|(&cost, _)| cost)
    }

    pub fn cuisine(&self, id: &str) -> Option<&Cuisine> {
        self.cuisines.iter().find(|c| c.id == id)
    }

    /// Plain display name of a cuisine id, falling back to the id itself.
    pub fn cuisine_name<'a>(&'a self, id: &'a str) -> &'a str {
        self.cuisine(id).and_then(|c| c.variants.first()).map(String::as_str).unwrap_or(id)
    }

    /// Canonical id for a cuisine display name or id (case-insensitive).
    pub fn cuisine_id(&self, name: &str) -> Option<&str> {
        let needle = name.trim().to_lowercase();
        self.cuisines
            .iter()
            .find(|c| c.id == needle || c.variants.first().is_some_and(|v| v.to_lowercase() == needle))
            .map(|c| c.id.as_str())
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.locations.is_empty() {
            return Err("at least one location is required".into());
        }
        for loc in &self.locations {
            loc.validate().map_err(|e| e.to_string())?;
        }
        if self.cuisines.len() < 2 {
            return Err("at least two cuisines are required".into());
        }
        if let Some(c) = self.cuisines.iter().find(|c| c.variants.is_empty()) {
            return Err(format!("cuisine `{}` has no lexical variants", c.id));
        }
        for cost in CostCategory::ALL {
            if self.cost_paraphrases.get(&cost).is_none_or(|l| l.is_empty()) {
                return Err(format!("no paraphrases for cost level `{cost}`"));
            }
        }
        if self.rating_phrases.is_empty() {
            return Err("no rating phrases".into());
        }
        if self.utterance_frames.is_empty() {
            return Err("no utterance frames".into());
        }
        for frame in &self.utterance_frames {
            for slot in ["{cuisine}", "{cost}", "{rating}"] {
                if !frame.contains(slot) {
                    return Err(format!("utterance frame lacks {slot}: {frame}"));
                }
            }
        }
        if self.venue_name_parts.first.is_empty() || self.venue_name_parts.second.is_empty() {
            return Err("venue name parts are empty".into());
        }
        Ok(())
    }
}
