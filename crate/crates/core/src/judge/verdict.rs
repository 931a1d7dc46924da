use serde_json::Value;
use thiserror::Error;

use crate::model::Verdict;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ParseError {
    #[error("no JSON object in response")]
    NoJsonObject,
    #[error("JSON object has no usable `decision` field")]
    NoDecision,
}

/// Reads the first JSON object embedded in `content`.
///
/// `decision` may be a boolean or the strings "true"/"false" in any case.
/// A `confidence` outside `[0, 1]` is dropped.
pub fn parse_verdict(content: &str) -> Result<Verdict, ParseError> {
    let object = first_json_object(content).ok_or(ParseError::NoJsonObject)?;
    let decision = match object.get("decision") {
        Some(Value::Bool(b)) => *b,
        Some(Value::String(s)) if s.trim().eq_ignore_ascii_case("true") => true,
        Some(Value::String(s)) if s.trim().eq_ignore_ascii_case("false") => false,
        _ => return Err(ParseError::NoDecision),
    };
    let explanation = match object.get("explanation") {
        Some(Value::String(s)) => s.clone(),
        Some(Value::Array(steps)) => steps
            .iter()
            .map(|s| s.as_str().map(str::to_string).unwrap_or_else(|| s.to_string()))
            .collect::<Vec<_>>()
            .join("\n"),
        Some(other) if !other.is_null() => other.to_string(),
        _ => String::new(),
    };
    let confidence = match object.get("confidence") {
        Some(Value::Number(n)) => n.as_f64(),
        Some(Value::String(s)) => s.trim().parse().ok(),
        _ => None,
    }
    .filter(|c| (0.0..=1.0).contains(c));
    Ok(Verdict { decision, explanation, confidence })
}

fn first_json_object(content: &str) -> Option<serde_json::Map<String, Value>> {
    content.match_indices('{').find_map(|(start, _)| {
        let mut stream = serde_json::Deserializer::from_str(&content[start..]).into_iter::<Value>();
        match stream.next() {
            Some(Ok(Value::Object(map))) => Some(map),
            _ => None,
        }
    })
}
