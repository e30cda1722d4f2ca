use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::phrase_miner::{class_of, OneToOneMappings};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Granularity {
    Method,
    Class,
}

impl fmt::Display for Granularity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Method => "method",
            Self::Class => "class",
        })
    }
}

impl FromStr for Granularity {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "method" => Ok(Self::Method),
            "class" => Ok(Self::Class),
            other => Err(format!("unknown granularity `{other}` (expected method or class)")),
        }
    }
}

/// A set of `source → target` token mappings at one granularity.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MappingSet {
    pub granularity: Granularity,
    pub pairs: BTreeSet<(String, String)>,
}

impl MappingSet {
    pub fn new<I, S, T>(granularity: Granularity, pairs: I) -> Self
    where
        I: IntoIterator<Item = (S, T)>,
        S: Into<String>,
        T: Into<String>,
    {
        Self {
            granularity,
            pairs: pairs.into_iter().map(|(s, t)| (s.into(), t.into())).collect(),
        }
    }

    pub fn from_mined(mined: &OneToOneMappings, granularity: Granularity) -> Self {
        let list = match granularity {
            Granularity::Method => &mined.method,
            Granularity::Class => &mined.class,
        };
        Self::new(granularity, list.iter().map(|m| (m.source.clone(), m.target.clone())))
    }
}

/// Reference mappings, optionally labelled with a package.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroundTruthSet {
    pub granularity: Granularity,
    pub mappings: BTreeSet<(String, String)>,
    pub packages: BTreeMap<(String, String), String>,
}

impl GroundTruthSet {
    pub fn new(granularity: Granularity) -> Self {
        Self {
            granularity,
            mappings: BTreeSet::new(),
            packages: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, source: &str, target: &str, package: Option<&str>) {
        let key = (source.to_string(), target.to_string());
        if let Some(p) = package {
            self.packages.insert(key.clone(), p.to_string());
        }
        self.mappings.insert(key);
    }

    pub fn len(&self) -> usize {
        self.mappings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mappings.is_empty()
    }

    /// Projects method-level mappings to class level, keeping a package
    /// label when all methods of a class pair agree on it.
    pub fn to_class_level(&self) -> Self {
        let mut out = Self::new(Granularity::Class);
        let mut labels: BTreeMap<(String, String), BTreeSet<&str>> = BTreeMap::new();
        for (s, t) in &self.mappings {
            let key = (class_of(s).to_string(), class_of(t).to_string());
            let entry = labels.entry(key.clone()).or_default();
            if let Some(p) = self.packages.get(&(s.clone(), t.clone())) {
                entry.insert(p);
            }
            out.mappings.insert(key);
        }
        for (key, set) in labels {
            if set.len() == 1 {
                out.packages.insert(key, set.into_iter().next().unwrap_or_default().to_string());
            }
        }
        out
    }

    /// Reads `source <TAB> target [<TAB> package]` lines.
    pub fn load(path: &Path, granularity: Granularity) -> Result<Self, EvalError> {
        let text = fs::read_to_string(path).map_err(|e| EvalError::Io {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        let mut out = Self::new(granularity);
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let f: Vec<&str> = line.split('\t').collect();
            if !(2..=3).contains(&f.len()) || f.iter().any(|x| x.is_empty()) {
                return Err(EvalError::Malformed {
                    file: path.display().to_string(),
                    line: i + 1,
                    reason: "expected `source <TAB> target [<TAB> package]`".into(),
                });
            }
            out.insert(f[0], f[1], f.get(2).copied());
        }
        Ok(out)
    }

    pub fn write(&self, path: &Path) -> Result<(), EvalError> {
        let mut text = String::new();
        for key in &self.mappings {
            text.push_str(&key.0);
            text.push('\t');
            text.push_str(&key.1);
            if let Some(p) = self.packages.get(key) {
                text.push('\t');
                text.push_str(p);
            }
            text.push('\n');
        }
        fs::write(path, text).map_err(|e| EvalError::Io {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
    pub precision: f64,
    pub recall: f64,
    pub f_score: f64,
}

impl ScoreRow {
    /// Precision and recall are 0 when their denominators are 0, and F is 0
    /// when P + R = 0.
    pub fn from_counts(tp: usize, fp: usize, fn_: usize) -> Self {
        let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        let f_score = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        Self {
            true_positives: tp,
            false_positives: fp,
            false_negatives: fn_,
            precision,
            recall,
            f_score,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub granularity: Granularity,
    pub overall: ScoreRow,
    /// One row per ground-truth package, in package order.
    pub packages: Vec<(String, ScoreRow)>,
}

impl EvalReport {
    /// Plain-text table with one row per package and a total row.
    pub fn table(&self) -> String {
        let mut out = format!(
            "{:<12} {:>5} {:>5} {:>5} {:>9} {:>9} {:>9}\n",
            "package", "TP", "FP", "FN", "precision", "recall", "F"
        );
        let rows = self
            .packages
            .iter()
            .map(|(p, r)| (p.as_str(), r))
            .chain(std::iter::once(("all", &self.overall)));
        for (name, r) in rows {
            out.push_str(&format!(
                "{:<12} {:>5} {:>5} {:>5} {:>9.4} {:>9.4} {:>9.4}\n",
                name, r.true_positives, r.false_positives, r.false_negatives, r.precision, r.recall, r.f_score
            ));
        }
        out
    }

    /// `key=value` lines prefixed with `prefix`.
    pub fn key_values(&self, prefix: &str) -> Vec<(String, String)> {
        let mut out = Vec::new();
        let mut push = |name: &str, r: &ScoreRow| {
            let p = format!("{prefix}.{name}");
            out.push((format!("{p}.tp"), r.true_positives.to_string()));
            out.push((format!("{p}.fp"), r.false_positives.to_string()));
            out.push((format!("{p}.fn"), r.false_negatives.to_string()));
            out.push((format!("{p}.precision"), format!("{:.6}", r.precision)));
            out.push((format!("{p}.recall"), format!("{:.6}", r.recall)));
            out.push((format!("{p}.f"), format!("{:.6}", r.f_score)));
        };
        push("all", &self.overall);
        for (name, r) in &self.packages {
            push(name, r);
        }
        out
    }
}

/// Precision, recall and F of `mined` against `truth` by exact set
/// comparison. A mined mapping counts toward a package row when its source
/// token appears in that package's ground truth.
pub fn score_mappings(mined: &MappingSet, truth: &GroundTruthSet) -> Result<EvalReport, EvalError> {
    if mined.granularity != truth.granularity {
        return Err(EvalError::GranularityMismatch {
            mined: mined.granularity,
            truth: truth.granularity,
        });
    }
    if truth.is_empty() {
        return Err(EvalError::EmptyTruth);
    }
    let score = |m: &BTreeSet<&(String, String)>, t: &BTreeSet<&(String, String)>| {
        let tp = m.intersection(t).count();
        ScoreRow::from_counts(tp, m.len() - tp, t.len() - tp)
    };
    let all_m: BTreeSet<_> = mined.pairs.iter().collect();
    let all_t: BTreeSet<_> = truth.mappings.iter().collect();
    let overall = score(&all_m, &all_t);

    let mut by_package: BTreeMap<&str, BTreeSet<&(String, String)>> = BTreeMap::new();
    let mut source_package: BTreeMap<&str, &str> = BTreeMap::new();
    for (key, p) in &truth.packages {
        by_package.entry(p).or_default().insert(key);
        source_package.entry(key.0.as_str()).or_insert(p);
    }
    let packages = by_package
        .into_iter()
        .map(|(p, t)| {
            let m: BTreeSet<_> = mined
                .pairs
                .iter()
                .filter(|k| source_package.get(k.0.as_str()) == Some(&p))
                .collect();
            (p.to_string(), score(&m, &t))
        })
        .collect();
    Ok(EvalReport {
        granularity: truth.granularity,
        overall,
        packages,
    })
}
