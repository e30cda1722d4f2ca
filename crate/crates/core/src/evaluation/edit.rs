use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::EvalError;

/// Edit operations allowed when turning a result into the truth.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CostModel {
    /// Deletions and insertions only (a substitution costs 2).
    #[default]
    DeleteAdd,
    /// Unit-cost insertions, deletions and substitutions.
    Levenshtein,
}

impl fmt::Display for CostModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::DeleteAdd => "delete-add",
            Self::Levenshtein => "levenshtein",
        })
    }
}

impl FromStr for CostModel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "delete-add" => Ok(Self::DeleteAdd),
            "levenshtein" => Ok(Self::Levenshtein),
            other => Err(format!("unknown cost model `{other}` (expected delete-add or levenshtein)")),
        }
    }
}

/// Token-level edit distance between `a` and `b`.
pub fn edit_distance<T: PartialEq>(a: &[T], b: &[T], model: CostModel) -> usize {
    let sub = match model {
        CostModel::DeleteAdd => 2,
        CostModel::Levenshtein => 1,
    };
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, x) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, y) in b.iter().enumerate() {
            let replace = prev[j] + if x == y { 0 } else { sub };
            cur[j + 1] = replace.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Summed edit distance over summed truth length, for `(result, truth)`
/// pairs.
pub fn edit_distance_ratio<T: PartialEq>(
    results: &[(Vec<T>, Vec<T>)],
    model: CostModel,
) -> Result<f64, EvalError> {
    if results.is_empty() {
        return Err(EvalError::NoResults);
    }
    let mut dist = 0usize;
    let mut len = 0usize;
    for (i, (result, truth)) in results.iter().enumerate() {
        if truth.is_empty() {
            return Err(EvalError::EmptyTruthSequence(i));
        }
        dist += edit_distance(result, truth, model);
        len += truth.len();
    }
    Ok(dist as f64 / len as f64)
}

/// Fraction of results judged correct. Without judgments (or with an empty
/// judgment list) a result is correct when it equals its truth exactly.
pub fn correctness<T: PartialEq>(
    results: &[(Vec<T>, Vec<T>)],
    judgments: Option<&[bool]>,
) -> Result<f64, EvalError> {
    if results.is_empty() {
        return Err(EvalError::NoResults);
    }
    let correct = match judgments {
        Some(j) if !j.is_empty() => {
            if j.len() != results.len() {
                return Err(EvalError::JudgmentCount {
                    judgments: j.len(),
                    results: results.len(),
                });
            }
            j.iter().filter(|x| **x).count()
        }
        _ => results.iter().filter(|(r, t)| r == t).count(),
    };
    Ok(correct as f64 / results.len() as f64)
}
