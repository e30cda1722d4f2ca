//! Phrase-pair counting over aligned API sequences and extraction of
//! mapping rules with translation probabilities.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type Phrase = Vec<String>;

#[derive(Debug, Error, PartialEq)]
pub enum MinerError {
    #[error("no aligned pairs to count")]
    NoPairs,
    #[error("max_phrase_len must be at least 1")]
    ZeroPhraseLen,
    #[error("threshold {0} outside [0, 1)")]
    InvalidThreshold(f64),
    #[error("count(s,t) = {count_st} exceeds count(s) = {count_s}")]
    CountOrder { count_st: u64, count_s: u64 },
    #[error("cannot access {path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("rules file line {line}: {reason}")]
    Malformed { line: usize, reason: String },
}

/// How occurrences within one aligned pair are counted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CountingMode {
    /// A phrase counts once per pair in which it occurs.
    #[default]
    Presence,
    /// A phrase counts once per position; a phrase pair counts
    /// `min(occurrences of s, occurrences of t)` per aligned pair.
    Multiplicity,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MiningOptions {
    pub max_phrase_len: usize,
    /// Rules need a probability strictly greater than this.
    pub threshold: f64,
    pub counting: CountingMode,
}

impl Default for MiningOptions {
    fn default() -> Self {
        Self {
            max_phrase_len: 8,
            threshold: 0.5,
            counting: CountingMode::Presence,
        }
    }
}

impl MiningOptions {
    pub fn validate(&self) -> Result<(), MinerError> {
        if self.max_phrase_len == 0 {
            return Err(MinerError::ZeroPhraseLen);
        }
        validate_threshold(self.threshold)
    }
}

fn validate_threshold(threshold: f64) -> Result<(), MinerError> {
    if (0.0..1.0).contains(&threshold) {
        Ok(())
    } else {
        Err(MinerError::InvalidThreshold(threshold))
    }
}

/// Occurrence count of every contiguous subsequence of `seq` with length
/// `1..=max_len`.
pub fn phrase_occurrences(seq: &[String], max_len: usize) -> BTreeMap<&[String], u64> {
    let mut out = BTreeMap::new();
    for start in 0..seq.len() {
        for len in 1..=max_len.min(seq.len() - start) {
            *out.entry(&seq[start..start + len]).or_insert(0) += 1;
        }
    }
    out
}

/// Count tables produced by [`extract_phrase_pairs`].
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PhraseCounts {
    /// count(s)
    pub source: HashMap<Phrase, u64>,
    /// count(s, t)
    pub pairs: HashMap<(Phrase, Phrase), u64>,
}

impl PhraseCounts {
    /// Adds every count of `other` into `self`.
    pub fn merge(&mut self, other: &PhraseCounts) {
        for (k, v) in &other.source {
            *self.source.entry(k.clone()).or_insert(0) += v;
        }
        for (k, v) in &other.pairs {
            *self.pairs.entry(k.clone()).or_insert(0) += v;
        }
    }

    /// Replaces count(s) with counts taken over `sequences` (for example
    /// every source sequence of the corpus instead of only aligned ones).
    pub fn with_source_counts(mut self, sequences: &[&[String]], options: &MiningOptions) -> Self {
        let mut source = HashMap::new();
        for seq in sequences {
            for (phrase, n) in phrase_occurrences(seq, options.max_phrase_len) {
                let add = match options.counting {
                    CountingMode::Presence => 1,
                    CountingMode::Multiplicity => n,
                };
                *source.entry(phrase.to_vec()).or_insert(0) += add;
            }
        }
        self.source = source;
        self
    }
}

/// Counts phrase occurrences over aligned `(source, target)` sequence pairs.
pub fn extract_phrase_pairs<S: AsRef<[String]>, T: AsRef<[String]>>(
    aligned: &[(S, T)],
    options: &MiningOptions,
) -> Result<PhraseCounts, MinerError> {
    if aligned.is_empty() {
        return Err(MinerError::NoPairs);
    }
    if options.max_phrase_len == 0 {
        return Err(MinerError::ZeroPhraseLen);
    }
    let mut counts = PhraseCounts::default();
    for (s, t) in aligned {
        let (s, t) = (s.as_ref(), t.as_ref());
        if s.is_empty() {
            continue;
        }
        let sp = phrase_occurrences(s, options.max_phrase_len);
        let tp = phrase_occurrences(t, options.max_phrase_len);
        for (sphrase, &sn) in &sp {
            let weight = |n: u64| match options.counting {
                CountingMode::Presence => 1,
                CountingMode::Multiplicity => n,
            };
            *counts.source.entry(sphrase.to_vec()).or_insert(0) += weight(sn);
            for (tphrase, &tn) in &tp {
                *counts
                    .pairs
                    .entry((sphrase.to_vec(), tphrase.to_vec()))
                    .or_insert(0) += weight(sn.min(tn));
            }
        }
    }
    Ok(counts)
}

/// `p(t|s) = count(s,t) / (count(s) + 1)`.
pub fn translation_probability(count_st: u64, count_s: u64) -> Result<f64, MinerError> {
    if count_st > count_s {
        return Err(MinerError::CountOrder { count_st, count_s });
    }
    Ok(count_st as f64 / (count_s as f64 + 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MappingRule {
    pub source: Phrase,
    pub target: Phrase,
    pub cooccurrence_count: u64,
    pub source_count: u64,
    pub probability: f64,
}

impl MappingRule {
    /// `source <TAB> target <TAB> p <TAB> count(s,t) <TAB> count(s)`.
    pub fn to_line(&self) -> String {
        format!(
            "{}\t{}\t{:.6}\t{}\t{}",
            self.source.join(" "),
            self.target.join(" "),
            self.probability,
            self.cooccurrence_count,
            self.source_count
        )
    }
}

/// Rule counts by source phrase length: 1, 2–3, 4–7, 8+.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct LengthBuckets {
    pub one: usize,
    pub two_to_three: usize,
    pub four_to_seven: usize,
    pub eight_plus: usize,
}

impl LengthBuckets {
    pub fn of(rules: &[MappingRule]) -> Self {
        let mut b = Self::default();
        for r in rules {
            match r.source.len() {
                0 | 1 => b.one += 1,
                2..=3 => b.two_to_three += 1,
                4..=7 => b.four_to_seven += 1,
                _ => b.eight_plus += 1,
            }
        }
        b
    }

    pub fn total(&self) -> usize {
        self.one + self.two_to_three + self.four_to_seven + self.eight_plus
    }

    pub fn labelled(&self) -> [(&'static str, usize); 4] {
        [
            ("1", self.one),
            ("2-3", self.two_to_three),
            ("4-7", self.four_to_seven),
            ("8+", self.eight_plus),
        ]
    }
}

/// Rules with probability strictly above `threshold`, sorted by descending
/// probability, descending co-occurrence count, then source and target
/// phrase.
pub fn mine_mappings(counts: &PhraseCounts, threshold: f64) -> Result<Vec<MappingRule>, MinerError> {
    validate_threshold(threshold)?;
    let mut rules = Vec::new();
    for ((s, t), &count_st) in &counts.pairs {
        let count_s = counts.source.get(s).copied().unwrap_or(0);
        let probability = translation_probability(count_st, count_s)?;
        if probability > threshold {
            rules.push(MappingRule {
                source: s.clone(),
                target: t.clone(),
                cooccurrence_count: count_st,
                source_count: count_s,
                probability,
            });
        }
    }
    rules.sort_by(|a, b| {
        b.probability
            .total_cmp(&a.probability)
            .then(b.cooccurrence_count.cmp(&a.cooccurrence_count))
            .then_with(|| a.source.cmp(&b.source))
            .then_with(|| a.target.cmp(&b.target))
    });
    Ok(rules)
}

/// Single-token mapping `source → target` with its probability.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenMapping {
    pub source: String,
    pub target: String,
    pub probability: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct OneToOneMappings {
    pub method: Vec<TokenMapping>,
    pub class: Vec<TokenMapping>,
}

/// Class part of a `Class.method` token (the whole token if it has no dot).
pub fn class_of(token: &str) -> &str {
    token.rsplit_once('.').map_or(token, |(c, _)| c)
}

/// Method-level rules (both phrases of length 1) and their projection to
/// class names, keeping each source class's most probable target class.
pub fn one_to_one_mappings(rules: &[MappingRule]) -> OneToOneMappings {
    let method: Vec<TokenMapping> = rules
        .iter()
        .filter(|r| r.source.len() == 1 && r.target.len() == 1)
        .map(|r| TokenMapping {
            source: r.source[0].clone(),
            target: r.target[0].clone(),
            probability: r.probability,
        })
        .collect();
    let mut best: BTreeMap<&str, (&str, f64)> = BTreeMap::new();
    for m in &method {
        let (s, t) = (class_of(&m.source), class_of(&m.target));
        let replace = match best.get(s) {
            None => true,
            Some(&(bt, bp)) => m.probability > bp || (m.probability == bp && t < bt),
        };
        if replace {
            best.insert(s, (t, m.probability));
        }
    }
    let class = best
        .into_iter()
        .map(|(s, (t, p))| TokenMapping {
            source: s.to_string(),
            target: t.to_string(),
            probability: p,
        })
        .collect();
    OneToOneMappings { method, class }
}

/// Translates `source` by greedy longest-match lookup over `rules`.
///
/// At each position the longest source phrase with a rule wins; among its
/// rules the highest probability, then highest count, then longest and
/// lexicographically smallest target is emitted. Tokens without any rule
/// are dropped.
pub fn migrate_sequence(rules: &[MappingRule], source: &[String]) -> Vec<String> {
    let mut table: HashMap<&[String], &MappingRule> = HashMap::new();
    for r in rules {
        let better = match table.get(r.source.as_slice()) {
            None => true,
            Some(cur) => {
                r.probability
                    .total_cmp(&cur.probability)
                    .then(r.cooccurrence_count.cmp(&cur.cooccurrence_count))
                    .then(r.target.len().cmp(&cur.target.len()))
                    .then_with(|| cur.target.cmp(&r.target))
                    .is_gt()
            }
        };
        if better {
            table.insert(&r.source, r);
        }
    }
    let longest = table.keys().map(|k| k.len()).max().unwrap_or(0);
    let mut out = Vec::new();
    let mut i = 0;
    while i < source.len() {
        let hit = (1..=longest.min(source.len() - i))
            .rev()
            .find_map(|len| table.get(&source[i..i + len]).map(|r| (len, *r)));
        match hit {
            Some((len, rule)) => {
                out.extend(rule.target.iter().cloned());
                i += len;
            }
            None => i += 1,
        }
    }
    out
}

pub fn write_rules(path: &Path, rules: &[MappingRule]) -> Result<(), MinerError> {
    let io = |e: std::io::Error| MinerError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    };
    let mut f = BufWriter::new(fs::File::create(path).map_err(io)?);
    for r in rules {
        writeln!(f, "{}", r.to_line()).map_err(io)?;
    }
    f.flush().map_err(io)
}

/// Reads a rules file. Probabilities are recomputed from the counts rather
/// than taken from the rounded column.
pub fn read_rules(path: &Path) -> Result<Vec<MappingRule>, MinerError> {
    let text = fs::read_to_string(path).map_err(|e| MinerError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    let mut rules = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let malformed = |reason: &str| MinerError::Malformed {
            line: i + 1,
            reason: reason.to_string(),
        };
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 5 {
            return Err(malformed("expected 5 tab-separated fields"));
        }
        let count = |s: &str| s.parse::<u64>().map_err(|_| malformed("count is not an integer"));
        let (count_st, count_s) = (count(f[3])?, count(f[4])?);
        let phrase = |s: &str| -> Phrase { s.split(' ').filter(|t| !t.is_empty()).map(String::from).collect() };
        let (source, target) = (phrase(f[0]), phrase(f[1]));
        if source.is_empty() || target.is_empty() {
            return Err(malformed("empty phrase"));
        }
        rules.push(MappingRule {
            source,
            target,
            cooccurrence_count: count_st,
            source_count: count_s,
            probability: translation_probability(count_st, count_s)
                .map_err(|e| malformed(&e.to_string()))?,
        });
    }
    Ok(rules)
}
