//! Krippendorff's alpha via the coincidence matrix.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AlphaMetric {
    Nominal,
    Ordinal,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AlphaError {
    #[error("at least two raters are required")]
    TooFewRaters,
    #[error("no unit has two or more values to pair")]
    InsufficientData,
    #[error("alpha is undefined: every pairable value is the same")]
    Undefined,
}

/// Units × raters; `None` marks a missing annotation.
///
/// Values are integer codes. For ordinal data the codes carry the order
/// (e.g. Likert 1–5); for nominal data only equality matters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationMatrix {
    pub raters: usize,
    pub units: Vec<Vec<Option<i64>>>,
}

impl AnnotationMatrix {
    /// Builds from rows of units; every row must have the same rater count.
    pub fn new(units: Vec<Vec<Option<i64>>>) -> Self {
        let raters = units.first().map_or(0, Vec::len);
        Self { raters, units }
    }

    /// Codes nominal text labels by first appearance.
    pub fn from_labels<S: AsRef<str>>(units: &[Vec<Option<S>>]) -> Self {
        let mut codes: BTreeMap<String, i64> = BTreeMap::new();
        let units = units
            .iter()
            .map(|row| {
                row.iter()
                    .map(|v| {
                        v.as_ref().map(|s| {
                            let next = codes.len() as i64;
                            *codes.entry(s.as_ref().to_string()).or_insert(next)
                        })
                    })
                    .collect()
            })
            .collect();
        Self::new(units)
    }
}

/// `alpha = 1 - D_o / D_e` over pairable values (units with at least two values).
pub fn krippendorff_alpha(matrix: &AnnotationMatrix, metric: AlphaMetric) -> Result<f64, AlphaError> {
    if matrix.raters < 2 {
        return Err(AlphaError::TooFewRaters);
    }
    // sorted distinct values and their index
    let mut values: Vec<i64> = matrix.units.iter().flatten().flatten().copied().collect();
    values.sort_unstable();
    values.dedup();
    let index: BTreeMap<i64, usize> = values.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    let k = values.len();

    let mut coincidence = vec![vec![0.0f64; k]; k];
    for unit in &matrix.units {
        let present: Vec<usize> = unit.iter().flatten().map(|v| index[v]).collect();
        let m = present.len();
        if m < 2 {
            continue;
        }
        let weight = 1.0 / (m as f64 - 1.0);
        for (i, &a) in present.iter().enumerate() {
            for (j, &b) in present.iter().enumerate() {
                if i != j {
                    coincidence[a][b] += weight;
                }
            }
        }
    }
    let marginals: Vec<f64> = coincidence.iter().map(|row| row.iter().sum()).collect();
    let n: f64 = marginals.iter().sum();
    if n < 2.0 {
        return Err(AlphaError::InsufficientData);
    }

    let delta = |c: usize, d: usize| -> f64 {
        match metric {
            AlphaMetric::Nominal => f64::from(u8::from(c != d)),
            AlphaMetric::Ordinal => {
                let (lo, hi) = if c <= d { (c, d) } else { (d, c) };
                let between: f64 = marginals[lo..=hi].iter().sum::<f64>() - (marginals[lo] + marginals[hi]) / 2.0;
                between * between
            }
        }
    };

    let mut observed = 0.0;
    let mut expected = 0.0;
    for c in 0..k {
        for d in 0..k {
            let dist = delta(c, d);
            observed += coincidence[c][d] * dist;
            expected += marginals[c] * marginals[d] * dist;
        }
    }
    let d_o = observed / n;
    let d_e = expected / (n * (n - 1.0));
    if d_e == 0.0 {
        return Err(AlphaError::Undefined);
    }
    Ok(1.0 - d_o / d_e)
}
