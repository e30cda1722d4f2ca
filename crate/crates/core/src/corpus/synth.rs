//! Seeded synthetic bilingual corpora with known concept labels.
//!
//! Spec files are TOML:
//!
//! ```toml
//! seed = 7                 # default generation seed
//! n_per_concept = 50       # default records per concept per language
//! synonym_rate = 0.5       # chance each description word is swapped within its group
//! synonyms = [["read", "load", "fetch"], ["file", "document"]]
//!
//! [noise]                  # default API-token noise
//! insertion = 0.0
//! substitution = 0.05
//!
//! [[concepts]]
//! concept_id = "read_file"
//! package = "io"                                   # optional
//! source_pattern = ["BufferedReader.new", "BufferedReader.readLine"]
//! target_pattern = ["StreamReader.ctor", "StreamReader.ReadLine"]
//! source_paraphrases = ["read lines from a file", "read a text file"]
//! target_paraphrases = ["load rows of a document", "fetch lines from a file"]
//! mappings = [["BufferedReader.readLine", "StreamReader.ReadLine"]]   # optional
//! noise = { insertion = 0.0, substitution = 0.1 }  # optional override
//! ```

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fs;
use std::io::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Corpus, CorpusConfig, CorpusError, Language, LoadReport, SnippetRecord};

pub const DEMO_CONCEPTS_TOML: &str = include_str!("../../data/demo_concepts.toml");

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseSpec {
    /// Probability of inserting a random same-language token after each position.
    pub insertion: f64,
    /// Probability of replacing each token with a random same-language token.
    pub substitution: f64,
}

impl NoiseSpec {
    fn validate(&self, context: &str) -> Result<(), CorpusError> {
        for (name, p) in [("insertion", self.insertion), ("substitution", self.substitution)] {
            if !(0.0..1.0).contains(&p) {
                return Err(CorpusError::InvalidSpec(format!(
                    "{context}: {name} probability {p} outside [0, 1)"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConceptSpec {
    pub concept_id: String,
    #[serde(default)]
    pub package: Option<String>,
    pub source_pattern: Vec<String>,
    pub target_pattern: Vec<String>,
    pub source_paraphrases: Vec<String>,
    pub target_paraphrases: Vec<String>,
    #[serde(default)]
    pub mappings: Option<Vec<(String, String)>>,
    #[serde(default)]
    pub noise: Option<NoiseSpec>,
}

impl ConceptSpec {
    pub fn pattern(&self, lang: Language) -> &[String] {
        match lang {
            Language::Source => &self.source_pattern,
            Language::Target => &self.target_pattern,
        }
    }

    pub fn paraphrases(&self, lang: Language) -> &[String] {
        match lang {
            Language::Source => &self.source_paraphrases,
            Language::Target => &self.target_paraphrases,
        }
    }

    /// Ground-truth method-level correspondences: the explicit `mappings`,
    /// or position-wise pairs when both patterns have the same length.
    pub fn token_mappings(&self) -> Vec<(String, String)> {
        match &self.mappings {
            Some(m) => m.clone(),
            None if self.source_pattern.len() == self.target_pattern.len() => self
                .source_pattern
                .iter()
                .cloned()
                .zip(self.target_pattern.iter().cloned())
                .collect(),
            None => Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSpec {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_n_per_concept")]
    pub n_per_concept: usize,
    #[serde(default)]
    pub synonym_rate: f64,
    #[serde(default)]
    pub synonyms: Vec<Vec<String>>,
    #[serde(default)]
    pub noise: NoiseSpec,
    pub concepts: Vec<ConceptSpec>,
}

fn default_n_per_concept() -> usize {
    50
}

impl SynthSpec {
    pub fn from_toml(text: &str) -> Result<Self, CorpusError> {
        let spec: SynthSpec =
            toml::from_str(text).map_err(|e| CorpusError::InvalidSpec(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self, CorpusError> {
        let text = fs::read_to_string(path).map_err(|source| CorpusError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<(), CorpusError> {
        let bad = |m: String| Err(CorpusError::InvalidSpec(m));
        if self.concepts.is_empty() {
            return bad("no concepts".into());
        }
        if !(0.0..=1.0).contains(&self.synonym_rate) {
            return bad(format!("synonym_rate {} outside [0, 1]", self.synonym_rate));
        }
        self.noise.validate("default noise")?;
        let mut word_groups = HashSet::new();
        for group in &self.synonyms {
            if group.len() < 2 {
                return bad(format!("synonym group {group:?} needs at least two words"));
            }
            for w in group {
                if !word_groups.insert(w.as_str()) {
                    return bad(format!("word `{w}` appears in more than one synonym group"));
                }
            }
        }
        let mut ids = HashSet::new();
        let mut tokens: [BTreeSet<&str>; 2] = [BTreeSet::new(), BTreeSet::new()];
        for c in &self.concepts {
            if c.concept_id.is_empty() || c.concept_id.contains(char::is_whitespace) {
                return bad(format!("invalid concept id `{}`", c.concept_id));
            }
            if !ids.insert(c.concept_id.as_str()) {
                return bad(format!("duplicate concept id `{}`", c.concept_id));
            }
            if let Some(n) = &c.noise {
                n.validate(&c.concept_id)?;
            }
            for (slot, lang) in Language::BOTH.into_iter().enumerate() {
                let pattern = c.pattern(lang);
                if pattern.is_empty() {
                    return bad(format!("{}: empty {lang} pattern", c.concept_id));
                }
                if let Some(t) = pattern.iter().find(|t| t.is_empty() || t.contains(char::is_whitespace)) {
                    return bad(format!("{}: invalid token `{t}`", c.concept_id));
                }
                tokens[slot].extend(pattern.iter().map(String::as_str));
                let paraphrases = c.paraphrases(lang);
                if paraphrases.len() < 2 {
                    return bad(format!(
                        "{}: {lang} needs at least two paraphrases",
                        c.concept_id
                    ));
                }
                if paraphrases.iter().any(|p| p.split_whitespace().next().is_none()) {
                    return bad(format!("{}: empty {lang} paraphrase", c.concept_id));
                }
            }
        }
        if let Some(t) = tokens[0].intersection(&tokens[1]).next() {
            return bad(format!(
                "token `{t}` appears in both SOURCE and TARGET patterns"
            ));
        }
        Ok(())
    }

    /// Sorted token namespace of one language.
    fn namespace(&self, lang: Language) -> Vec<String> {
        let set: BTreeSet<&String> = self
            .concepts
            .iter()
            .flat_map(|c| c.pattern(lang).iter())
            .collect();
        set.into_iter().cloned().collect()
    }
}

/// Demo specification bundled with the crate (20 concepts).
pub fn demo_concepts() -> SynthSpec {
    SynthSpec::from_toml(DEMO_CONCEPTS_TOML).expect("bundled demo spec is valid")
}

/// Record id → concept id.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConceptAssignments(pub BTreeMap<String, String>);

impl ConceptAssignments {
    pub fn get(&self, record_id: &str) -> Option<&str> {
        self.0.get(record_id).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Writes `record_id <TAB> concept_id` lines.
    pub fn write(&self, path: &Path) -> Result<(), CorpusError> {
        let io = |source| CorpusError::Io {
            path: path.to_path_buf(),
            source,
        };
        let mut f = std::io::BufWriter::new(fs::File::create(path).map_err(io)?);
        for (r, c) in &self.0 {
            writeln!(f, "{r}\t{c}").map_err(io)?;
        }
        f.flush().map_err(io)
    }

    pub fn load(path: &Path) -> Result<Self, CorpusError> {
        let text = fs::read_to_string(path).map_err(|source| CorpusError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut map = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.split('\t');
            match (parts.next(), parts.next(), parts.next()) {
                (Some(r), Some(c), None) if !r.is_empty() && !c.is_empty() => {
                    map.insert(r.to_string(), c.to_string());
                }
                _ => {
                    return Err(CorpusError::Malformed {
                        line: i + 1,
                        reason: "expected `record_id <TAB> concept_id`".into(),
                    })
                }
            }
        }
        Ok(Self(map))
    }
}

/// Generates `n_per_concept` records per concept per language.
///
/// Each record is the concept's API pattern (with token noise) paired with
/// one of its paraphrases (with synonym swaps). Output is a pure function of
/// `(spec, n_per_concept, seed)`.
pub fn generate_synthetic_corpus(
    spec: &SynthSpec,
    n_per_concept: usize,
    seed: u64,
    config: CorpusConfig,
) -> Result<(Corpus, LoadReport, ConceptAssignments), CorpusError> {
    spec.validate()?;
    if n_per_concept == 0 {
        return Err(CorpusError::InvalidSpec("n_per_concept must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let namespaces = [spec.namespace(Language::Source), spec.namespace(Language::Target)];
    let groups: HashMap<&str, &[String]> = spec
        .synonyms
        .iter()
        .flat_map(|g| g.iter().map(move |w| (w.as_str(), g.as_slice())))
        .collect();

    let mut records = Vec::with_capacity(spec.concepts.len() * n_per_concept * 2);
    let mut assignments = BTreeMap::new();
    for concept in &spec.concepts {
        let noise = concept.noise.unwrap_or(spec.noise);
        for (slot, lang) in Language::BOTH.into_iter().enumerate() {
            let prefix = match lang {
                Language::Source => "src",
                Language::Target => "tgt",
            };
            for k in 0..n_per_concept {
                let api_sequence =
                    noised_pattern(concept.pattern(lang), &noise, &namespaces[slot], &mut rng);
                let paraphrase = concept
                    .paraphrases(lang)
                    .choose(&mut rng)
                    .expect("validated: at least two paraphrases");
                let description = paraphrase
                    .split_whitespace()
                    .map(|w| {
                        let w = w.to_lowercase();
                        match groups.get(w.as_str()) {
                            Some(group) if rng.gen::<f64>() < spec.synonym_rate => {
                                group.choose(&mut rng).cloned().unwrap_or(w)
                            }
                            _ => w,
                        }
                    })
                    .collect();
                let id = format!("{prefix}-{}-{k:04}", concept.concept_id);
                assignments.insert(id.clone(), concept.concept_id.clone());
                records.push(SnippetRecord {
                    id,
                    language: lang,
                    api_sequence,
                    description,
                    provenance: Some(format!("synthetic:{}", concept.concept_id)),
                });
            }
        }
    }
    let (corpus, report) = Corpus::from_records(records, config)?;
    let kept: HashSet<&str> = corpus.records.iter().map(|r| r.id.as_str()).collect();
    assignments.retain(|id, _| kept.contains(id.as_str()));
    Ok((corpus, report, ConceptAssignments(assignments)))
}

fn noised_pattern<R: Rng>(
    pattern: &[String],
    noise: &NoiseSpec,
    namespace: &[String],
    rng: &mut R,
) -> Vec<String> {
    let mut out = Vec::with_capacity(pattern.len() + 2);
    for token in pattern {
        if rng.gen::<f64>() < noise.substitution {
            out.push(namespace.choose(rng).cloned().unwrap_or_else(|| token.clone()));
        } else {
            out.push(token.clone());
        }
        if rng.gen::<f64>() < noise.insertion {
            if let Some(t) = namespace.choose(rng) {
                out.push(t.clone());
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_concept(noise: f64) -> SynthSpec {
        SynthSpec {
            seed: 1,
            n_per_concept: 2,
            synonym_rate: 0.0,
            synonyms: vec![],
            noise: NoiseSpec {
                insertion: noise,
                substitution: noise,
            },
            concepts: vec![ConceptSpec {
                concept_id: "c".into(),
                package: None,
                source_pattern: vec!["A.x".into(), "A.y".into()],
                target_pattern: vec!["B.x".into()],
                source_paraphrases: vec!["do x".into(), "perform x".into()],
                target_paraphrases: vec!["run x".into(), "execute x".into()],
                mappings: None,
                noise: None,
            }],
        }
    }

    #[test]
    fn noiseless_single_concept() {
        let spec = one_concept(0.0);
        let (c, _, truth) = generate_synthetic_corpus(&spec, 2, 3, CorpusConfig::default()).unwrap();
        assert_eq!(c.count(Language::Source), 2);
        assert_eq!(c.count(Language::Target), 2);
        assert_eq!(truth.len(), 4);
        assert!(truth.0.values().all(|v| v == "c"));
        for r in &c.records {
            assert_eq!(r.api_sequence, spec.concepts[0].pattern(r.language));
        }
    }

    #[test]
    fn same_seed_same_corpus() {
        let spec = demo_concepts();
        let a = generate_synthetic_corpus(&spec, 5, 9, CorpusConfig::default()).unwrap();
        let b = generate_synthetic_corpus(&spec, 5, 9, CorpusConfig::default()).unwrap();
        let lines = |c: &Corpus| c.records.iter().map(|r| r.to_line()).collect::<Vec<_>>();
        assert_eq!(lines(&a.0), lines(&b.0));
        assert_eq!(a.2, b.2);
        let c = generate_synthetic_corpus(&spec, 5, 10, CorpusConfig::default()).unwrap();
        assert_ne!(lines(&a.0), lines(&c.0));
    }

    #[test]
    fn demo_counts_per_concept() {
        let spec = demo_concepts();
        assert_eq!(spec.concepts.len(), 20);
        let (c, _, truth) = generate_synthetic_corpus(&spec, 50, 7, CorpusConfig::default()).unwrap();
        assert_eq!(c.len(), 2000);
        for concept in &spec.concepts {
            for lang in Language::BOTH {
                let n = c
                    .records_of(lang)
                    .filter(|r| truth.get(&r.id) == Some(concept.concept_id.as_str()))
                    .count();
                assert_eq!(n, 50);
            }
        }
    }

    #[test]
    fn validation_catches_bad_specs() {
        let mut s = one_concept(0.0);
        s.concepts[0].target_pattern = vec!["A.x".into()];
        assert!(s.validate().is_err());

        let mut s = one_concept(0.0);
        s.concepts[0].source_paraphrases.pop();
        assert!(s.validate().is_err());

        let mut s = one_concept(0.0);
        s.noise.substitution = 1.0;
        assert!(s.validate().is_err());

        let s = one_concept(0.0);
        assert!(generate_synthetic_corpus(&s, 0, 1, CorpusConfig::default()).is_err());
    }

    #[test]
    fn position_wise_mappings_for_equal_lengths() {
        let spec = demo_concepts();
        let m = spec.concepts[0].token_mappings();
        assert_eq!(m.len(), 3);
        assert_eq!(m[1], ("BufferedReader.readLine".into(), "StreamReader.ReadLine".into()));
        assert!(one_concept(0.0).concepts[0].token_mappings().is_empty());
    }

    #[test]
    fn assignments_file_round_trip() {
        let (_, _, truth) =
            generate_synthetic_corpus(&one_concept(0.0), 2, 1, CorpusConfig::default()).unwrap();
        let f = tempfile::NamedTempFile::new().unwrap();
        truth.write(f.path()).unwrap();
        assert_eq!(ConceptAssignments::load(f.path()).unwrap(), truth);
    }
}
