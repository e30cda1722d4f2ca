use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::alignment::{AlignedPair, Direction};
use crate::corpus::{Corpus, Language};

const STOPWORDS: &[&str] = &[
    "a", "an", "and", "are", "as", "at", "be", "by", "for", "from", "if", "in", "into", "is", "it",
    "its", "of", "on", "or", "that", "the", "this", "to", "under", "with",
];

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IrOptions {
    pub direction: Direction,
    pub stopwords: bool,
    pub stemming: bool,
}

/// Output of [`ir_baseline_align`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct IrAlignment {
    pub pairs: Vec<AlignedPair>,
    /// Records whose description had no terms left after filtering.
    pub skipped: Vec<String>,
    /// Indices into `pairs` whose best similarity was zero.
    pub low_confidence: Vec<usize>,
}

/// Strips a few common English suffixes.
fn stem(word: &str) -> &str {
    for suffix in ["ing", "ed", "s"] {
        if let Some(stripped) = word.strip_suffix(suffix) {
            if stripped.len() >= 3 {
                return stripped;
            }
        }
    }
    word
}

struct Doc {
    id: String,
    /// Sorted `(term, weight)` pairs.
    weights: Vec<(usize, f64)>,
    norm: f64,
}

fn sparse_dot(a: &[(usize, f64)], b: &[(usize, f64)]) -> f64 {
    let (mut i, mut j, mut acc) = (0, 0, 0.0);
    while i < a.len() && j < b.len() {
        match a[i].0.cmp(&b[j].0) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                acc += a[i].1 * b[j].1;
                i += 1;
                j += 1;
            }
        }
    }
    acc
}

/// Aligns records by TF-IDF cosine similarity of their descriptions.
///
/// Term weights are raw term frequency times `ln((1 + N) / (1 + df)) + 1`,
/// where `N` counts the descriptions of both languages. Each query is paired
/// with its most similar description of the other language; ties go to the
/// smaller record id.
pub fn ir_baseline_align(corpus: &Corpus, options: &IrOptions) -> Result<IrAlignment, EvalError> {
    let mut vocab: HashMap<String, usize> = HashMap::new();
    let mut out = IrAlignment::default();
    let mut tokenized: Vec<(&str, Language, BTreeMap<usize, f64>)> = Vec::new();
    for r in &corpus.records {
        let mut tf = BTreeMap::new();
        for w in &r.description {
            if options.stopwords && STOPWORDS.contains(&w.as_str()) {
                continue;
            }
            let w = if options.stemming { stem(w) } else { w.as_str() };
            let next = vocab.len();
            let id = *vocab.entry(w.to_string()).or_insert(next);
            *tf.entry(id).or_insert(0.0) += 1.0;
        }
        if tf.is_empty() {
            out.skipped.push(r.id.clone());
        } else {
            tokenized.push((&r.id, r.language, tf));
        }
    }
    let n = tokenized.len() as f64;
    let mut df = vec![0usize; vocab.len()];
    for (_, _, tf) in &tokenized {
        for term in tf.keys() {
            df[*term] += 1;
        }
    }
    let idf: Vec<f64> = df
        .iter()
        .map(|d| ((1.0 + n) / (1.0 + *d as f64)).ln() + 1.0)
        .collect();

    let mut pools: [Vec<Doc>; 2] = [Vec::new(), Vec::new()];
    for (id, lang, tf) in tokenized {
        let weights: Vec<(usize, f64)> = tf.into_iter().map(|(t, f)| (t, f * idf[t])).collect();
        let norm = weights.iter().map(|(_, w)| w * w).sum::<f64>().sqrt();
        pools[lang as usize].push(Doc {
            id: id.to_string(),
            weights,
            norm,
        });
    }
    for lang in Language::BOTH {
        if pools[lang as usize].is_empty() {
            return Err(EvalError::NoDocuments(lang));
        }
    }

    let queries: &[Language] = match options.direction {
        Direction::SourceToTarget => &[Language::Source],
        Direction::TargetToSource => &[Language::Target],
        Direction::Both => &Language::BOTH,
    };
    for &query in queries {
        for q in &pools[query as usize] {
            let mut best: Option<(&Doc, f64)> = None;
            for c in &pools[query.other() as usize] {
                let score = (sparse_dot(&q.weights, &c.weights) / (q.norm * c.norm)).clamp(-1.0, 1.0);
                best = match best {
                    Some((b, s)) if s > score || (s == score && b.id <= c.id) => Some((b, s)),
                    _ => Some((c, score)),
                };
            }
            let (c, score) = best.expect("non-empty pool");
            let (source_id, target_id) = match query {
                Language::Source => (q.id.clone(), c.id.clone()),
                Language::Target => (c.id.clone(), q.id.clone()),
            };
            if score == 0.0 {
                out.low_confidence.push(out.pairs.len());
            }
            out.pairs.push(AlignedPair {
                source_id,
                target_id,
                score,
                query,
            });
        }
    }
    Ok(out)
}
