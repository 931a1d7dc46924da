//! Per-model token pricing.

use std::collections::BTreeMap;
use std::path::Path;

use rust_decimal::Decimal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

const REFERENCE_RATES: &str = include_str!("../../data/rates.json");

#[derive(Debug, Clone, Error, PartialEq)]
pub enum CostError {
    #[error("no pricing for model `{0}`")]
    UnknownModel(String),
    #[error("invalid rate table: {0}")]
    InvalidTable(String),
}

/// USD per one million tokens.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TokenRates {
    pub input: Decimal,
    pub output: Decimal,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CostTable {
    #[serde(default)]
    pub version: String,
    pub models: BTreeMap<String, TokenRates>,
}

impl CostTable {
    /// The shipped July 2025 baseline rates.
    pub fn reference() -> Self {
        Self::from_json(REFERENCE_RATES).expect("shipped rate table parses")
    }

    pub fn from_json(text: &str) -> Result<Self, CostError> {
        let table: CostTable = serde_json::from_str(text).map_err(|e| CostError::InvalidTable(e.to_string()))?;
        if let Some((model, _)) =
            table.models.iter().find(|(_, r)| r.input.is_sign_negative() || r.output.is_sign_negative())
        {
            return Err(CostError::InvalidTable(format!("negative rate for `{model}`")));
        }
        Ok(table)
    }

    pub fn load(path: &Path) -> Result<Self, CostError> {
        let text = std::fs::read_to_string(path).map_err(|e| CostError::InvalidTable(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn insert(&mut self, model_id: impl Into<String>, input: Decimal, output: Decimal) {
        self.models.insert(model_id.into(), TokenRates { input, output });
    }

    pub fn contains(&self, model_id: &str) -> bool {
        self.models.contains_key(model_id)
    }

    pub fn cost_of(&self, model_id: &str, input_tokens: u64, output_tokens: u64) -> Result<Decimal, CostError> {
        let rates = self.models.get(model_id).ok_or_else(|| CostError::UnknownModel(model_id.to_string()))?;
        let million = Decimal::from(1_000_000u64);
        Ok((Decimal::from(input_tokens) * rates.input + Decimal::from(output_tokens) * rates.output) / million)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::str::FromStr;

    fn d(s: &str) -> Decimal {
        Decimal::from_str(s).unwrap()
    }

    #[test]
    fn gpt4_turbo_thousand_in_five_hundred_out() {
        let t = CostTable::reference();
        assert_eq!(t.cost_of("gpt-4-turbo", 1000, 500).unwrap(), d("0.025"));
    }

    #[test]
    fn mistral_nemo_million_each() {
        let t = CostTable::reference();
        assert_eq!(t.cost_of("mistral-nemo", 1_000_000, 1_000_000).unwrap(), d("0.60"));
    }

    #[test]
    fn zero_tokens_cost_nothing() {
        assert_eq!(CostTable::reference().cost_of("o3", 0, 0).unwrap(), Decimal::ZERO);
    }

    #[test]
    fn unknown_model() {
        assert_eq!(
            CostTable::reference().cost_of("gpt-5", 1, 1),
            Err(CostError::UnknownModel("gpt-5".into()))
        );
    }

    #[test]
    fn reference_table_has_thirteen_models() {
        let t = CostTable::reference();
        assert_eq!(t.models.len(), 13);
        assert_eq!(t.models["llama-3.1-405b"], TokenRates { input: d("5.33"), output: d("16.00") });
        assert_eq!(t.models["deepseek-r1"], TokenRates { input: d("0.55"), output: d("2.19") });
    }

    #[test]
    fn negative_rates_rejected() {
        let err = CostTable::from_json(r#"{"models": {"m": {"input": "-1", "output": "1"}}}"#).unwrap_err();
        assert!(matches!(err, CostError::InvalidTable(_)));
    }

    proptest! {
        #[test]
        fn linear_in_each_argument(a in 0u64..5_000_000, b in 0u64..5_000_000, c in 0u64..5_000_000) {
            let t = CostTable::reference();
            let lhs = t.cost_of("deepseek-v3", a + b, c).unwrap();
            let rhs = t.cost_of("deepseek-v3", a, c).unwrap() + t.cost_of("deepseek-v3", b, 0).unwrap();
            prop_assert_eq!(lhs, rhs);
            let lhs = t.cost_of("deepseek-v3", c, a + b).unwrap();
            let rhs = t.cost_of("deepseek-v3", c, a).unwrap() + t.cost_of("deepseek-v3", 0, b).unwrap();
            prop_assert_eq!(lhs, rhs);
        }
    }
}
