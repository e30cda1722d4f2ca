//! Nearest-neighbour alignment of semantic vectors across languages.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{ConceptAssignments, Language};
use crate::neural::dot;
use crate::seq2seq::SemanticVector;

#[derive(Debug, Error, PartialEq)]
pub enum AlignError {
    #[error("vector lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("zero vector for record {0}")]
    ZeroVector(String),
    #[error("{0} index is empty")]
    EmptyIndex(Language),
    #[error("index for {expected} contains a {found} vector ({id})")]
    WrongLanguage {
        expected: Language,
        found: Language,
        id: String,
    },
    #[error("duplicate record id {0}")]
    DuplicateId(String),
    #[error("no ground truth for record {0}")]
    MissingTruth(String),
    #[error("min_score {0} outside [-1, 1]")]
    InvalidMinScore(f64),
    #[error("unknown direction `{0}` (expected source-to-target, target-to-source or both)")]
    UnknownDirection(String),
    #[error("cannot access {path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("pairs file line {line}: {reason}")]
    Malformed { line: usize, reason: String },
}

/// Cosine similarity, clamped to [-1, 1].
pub fn cosine_similarity(a: &[f64], b: &[f64]) -> Result<f64, AlignError> {
    if a.len() != b.len() {
        return Err(AlignError::LengthMismatch(a.len(), b.len()));
    }
    let (na, nb) = (dot(a, a).sqrt(), dot(b, b).sqrt());
    if na == 0.0 || nb == 0.0 {
        return Err(AlignError::ZeroVector(String::new()));
    }
    Ok((dot(a, b) / (na * nb)).clamp(-1.0, 1.0))
}

/// Semantic vectors of one language with precomputed norms.
#[derive(Debug, Clone)]
pub struct EmbeddingIndex {
    language: Language,
    ids: Vec<String>,
    vectors: Vec<Vec<f64>>,
    norms: Vec<f64>,
}

impl EmbeddingIndex {
    pub fn build(language: Language, vectors: &[SemanticVector]) -> Result<Self, AlignError> {
        let mut index = Self {
            language,
            ids: Vec::with_capacity(vectors.len()),
            vectors: Vec::with_capacity(vectors.len()),
            norms: Vec::with_capacity(vectors.len()),
        };
        let mut seen = BTreeSet::new();
        for v in vectors {
            if v.language != language {
                return Err(AlignError::WrongLanguage {
                    expected: language,
                    found: v.language,
                    id: v.record_id.clone(),
                });
            }
            if !seen.insert(v.record_id.as_str()) {
                return Err(AlignError::DuplicateId(v.record_id.clone()));
            }
            if let Some(first) = index.vectors.first() {
                if first.len() != v.values.len() {
                    return Err(AlignError::LengthMismatch(first.len(), v.values.len()));
                }
            }
            let norm = dot(&v.values, &v.values).sqrt();
            if norm == 0.0 || !norm.is_finite() {
                return Err(AlignError::ZeroVector(v.record_id.clone()));
            }
            index.ids.push(v.record_id.clone());
            index.vectors.push(v.values.clone());
            index.norms.push(norm);
        }
        Ok(index)
    }

    /// Splits mixed-language vectors into a source and a target index.
    pub fn split(vectors: &[SemanticVector]) -> Result<(Self, Self), AlignError> {
        let (src, tgt): (Vec<_>, Vec<_>) = vectors
            .iter()
            .cloned()
            .partition(|v| v.language == Language::Source);
        Ok((
            Self::build(Language::Source, &src)?,
            Self::build(Language::Target, &tgt)?,
        ))
    }

    pub fn language(&self) -> Language {
        self.language
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn vector(&self, i: usize) -> &[f64] {
        &self.vectors[i]
    }

    pub fn norm(&self, i: usize) -> f64 {
        self.norms[i]
    }

    fn dim(&self) -> Option<usize> {
        self.vectors.first().map(Vec::len)
    }

    /// Exact nearest neighbour of `query` by cosine; ties go to the
    /// lexicographically smaller id.
    pub fn nearest(&self, query: &[f64], query_norm: f64) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        for j in 0..self.len() {
            let score = (dot(query, &self.vectors[j]) / (query_norm * self.norms[j])).clamp(-1.0, 1.0);
            best = match best {
                Some((b, s)) if s > score || (s == score && self.ids[b] <= self.ids[j]) => Some((b, s)),
                _ => Some((j, score)),
            };
        }
        best
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Direction {
    #[default]
    SourceToTarget,
    TargetToSource,
    Both,
}

impl FromStr for Direction {
    type Err = AlignError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "source-to-target" => Ok(Self::SourceToTarget),
            "target-to-source" => Ok(Self::TargetToSource),
            "both" => Ok(Self::Both),
            other => Err(AlignError::UnknownDirection(other.to_string())),
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::SourceToTarget => "source-to-target",
            Self::TargetToSource => "target-to-source",
            Self::Both => "both",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AlignOptions {
    pub direction: Direction,
    /// Keep only pairs that are each other's nearest neighbour.
    pub mutual: bool,
    /// Drop pairs scoring below this value.
    pub min_score: Option<f64>,
}

impl AlignOptions {
    pub fn validate(&self) -> Result<(), AlignError> {
        match self.min_score {
            Some(m) if !(-1.0..=1.0).contains(&m) => Err(AlignError::InvalidMinScore(m)),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignedPair {
    pub source_id: String,
    pub target_id: String,
    pub score: f64,
    /// Language whose record issued the query.
    pub query: Language,
}

impl AlignedPair {
    pub fn to_line(&self) -> String {
        format!("{}\t{}\t{:.6}", self.source_id, self.target_id, self.score)
    }
}

fn search(from: &EmbeddingIndex, to: &EmbeddingIndex) -> Vec<(usize, usize, f64)> {
    (0..from.len())
        .map(|i| {
            let (j, s) = to
                .nearest(&from.vectors[i], from.norms[i])
                .expect("non-empty index");
            (i, j, s)
        })
        .collect()
}

/// Pairs every query-side record with its most similar record on the other
/// side by exhaustive search.
///
/// Output follows query order: all source queries first, then target
/// queries. With [`Direction::Both`] a pair found in both directions is
/// reported once, as a source query.
pub fn align(
    source: &EmbeddingIndex,
    target: &EmbeddingIndex,
    options: &AlignOptions,
) -> Result<Vec<AlignedPair>, AlignError> {
    options.validate()?;
    for index in [source, target] {
        if index.is_empty() {
            return Err(AlignError::EmptyIndex(index.language));
        }
    }
    if source.dim() != target.dim() {
        return Err(AlignError::LengthMismatch(
            source.dim().unwrap_or(0),
            target.dim().unwrap_or(0),
        ));
    }
    let need_forward = options.direction != Direction::TargetToSource || options.mutual;
    let need_backward = options.direction != Direction::SourceToTarget || options.mutual;
    let forward = need_forward.then(|| search(source, target));
    let backward = need_backward.then(|| search(target, source));
    let best_t: Option<Vec<usize>> = forward.as_ref().map(|f| f.iter().map(|x| x.1).collect());
    let best_s: Option<Vec<usize>> = backward.as_ref().map(|b| b.iter().map(|x| x.1).collect());

    let keep = |score: f64| options.min_score.is_none_or(|m| score >= m);
    let mut out = Vec::new();
    let mut emitted = BTreeSet::new();
    if matches!(options.direction, Direction::SourceToTarget | Direction::Both) {
        for &(i, j, s) in forward.as_ref().expect("computed") {
            if options.mutual && best_s.as_ref().expect("computed")[j] != i {
                continue;
            }
            if keep(s) {
                emitted.insert((i, j));
                out.push(AlignedPair {
                    source_id: source.ids[i].clone(),
                    target_id: target.ids[j].clone(),
                    score: s,
                    query: Language::Source,
                });
            }
        }
    }
    if matches!(options.direction, Direction::TargetToSource | Direction::Both) {
        for &(j, i, s) in backward.as_ref().expect("computed") {
            if options.mutual && best_t.as_ref().expect("computed")[i] != j {
                continue;
            }
            if keep(s) && !emitted.contains(&(i, j)) {
                out.push(AlignedPair {
                    source_id: source.ids[i].clone(),
                    target_id: target.ids[j].clone(),
                    score: s,
                    query: Language::Target,
                });
            }
        }
    }
    Ok(out)
}

/// Concept-level accuracy of an alignment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AccuracyReport {
    /// Fraction of source-query pairs that share a concept.
    pub source: Option<f64>,
    /// Fraction of target-query pairs that share a concept.
    pub target: Option<f64>,
    /// Mean of the available directions.
    pub mean: Option<f64>,
    pub source_pairs: usize,
    pub target_pairs: usize,
}

/// A pair is correct when both records carry the same concept. Pairs found
/// in both directions (deduplicated by [`align`]) count for both.
pub fn alignment_accuracy(
    pairs: &[AlignedPair],
    truth: &ConceptAssignments,
) -> Result<AccuracyReport, AlignError> {
    let mut hits = [0usize; 2];
    let mut totals = [0usize; 2];
    for p in pairs {
        let s = truth
            .get(&p.source_id)
            .ok_or_else(|| AlignError::MissingTruth(p.source_id.clone()))?;
        let t = truth
            .get(&p.target_id)
            .ok_or_else(|| AlignError::MissingTruth(p.target_id.clone()))?;
        let slot = p.query as usize;
        totals[slot] += 1;
        if s == t {
            hits[slot] += 1;
        }
    }
    let ratio = |k: usize| (totals[k] > 0).then(|| hits[k] as f64 / totals[k] as f64);
    let (source, target) = (ratio(0), ratio(1));
    let mean = match (source, target) {
        (Some(a), Some(b)) => Some((a + b) / 2.0),
        (a, b) => a.or(b),
    };
    Ok(AccuracyReport {
        source,
        target,
        mean,
        source_pairs: totals[0],
        target_pairs: totals[1],
    })
}

/// Aligns in both directions and scores each.
pub fn bidirectional_accuracy(
    source: &EmbeddingIndex,
    target: &EmbeddingIndex,
    truth: &ConceptAssignments,
) -> Result<AccuracyReport, AlignError> {
    let mut pairs = align(source, target, &AlignOptions::default())?;
    pairs.extend(align(
        source,
        target,
        &AlignOptions {
            direction: Direction::TargetToSource,
            ..AlignOptions::default()
        },
    )?);
    alignment_accuracy(&pairs, truth)
}

pub fn write_pairs(path: &Path, pairs: &[AlignedPair]) -> Result<(), AlignError> {
    let io = |e: std::io::Error| AlignError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    };
    let mut f = BufWriter::new(fs::File::create(path).map_err(io)?);
    for p in pairs {
        writeln!(f, "{}", p.to_line()).map_err(io)?;
    }
    f.flush().map_err(io)
}

/// Reads a pairs file. Query direction is not stored in the file, so every
/// pair is read back as a source query.
pub fn read_pairs(path: &Path) -> Result<Vec<AlignedPair>, AlignError> {
    let text = fs::read_to_string(path).map_err(|e| AlignError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split('\t').collect();
        let malformed = |reason: &str| AlignError::Malformed {
            line: i + 1,
            reason: reason.to_string(),
        };
        if f.len() != 3 {
            return Err(malformed("expected `source_id <TAB> target_id <TAB> score`"));
        }
        let score = f[2].parse::<f64>().map_err(|_| malformed("score is not a number"))?;
        out.push(AlignedPair {
            source_id: f[0].to_string(),
            target_id: f[1].to_string(),
            score,
            query: Language::Source,
        });
    }
    Ok(out)
}

/// Joins pairs with record API sequences, keyed by record id.
pub fn pair_sequences<'a>(
    pairs: &[AlignedPair],
    sequences: &'a HashMap<String, Vec<String>>,
) -> Result<Vec<(&'a [String], &'a [String])>, AlignError> {
    pairs
        .iter()
        .map(|p| {
            let s = sequences
                .get(&p.source_id)
                .ok_or_else(|| AlignError::MissingTruth(p.source_id.clone()))?;
            let t = sequences
                .get(&p.target_id)
                .ok_or_else(|| AlignError::MissingTruth(p.target_id.clone()))?;
            Ok((s.as_slice(), t.as_slice()))
        })
        .collect()
}
