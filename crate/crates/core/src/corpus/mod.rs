//! Bilingual ⟨API sequence, description⟩ corpora.
//!
//! The on-disk format is one record per line:
//!
//! ```text
//! id <TAB> SOURCE|TARGET <TAB> api tokens (space separated) <TAB> description words [<TAB> provenance]
//! ```
//!
//! Blank lines and lines starting with `#` are ignored.

mod summary;
mod synth;
mod vocab;

pub use summary::extract_summary;
pub use synth::{
    demo_concepts, generate_synthetic_corpus, ConceptAssignments, ConceptSpec, NoiseSpec,
    SynthSpec, DEMO_CONCEPTS_TOML,
};
pub use vocab::{
    build_vocabulary, encode_sequence, EncodedSequence, Modality, Side, Vocabulary, BOS,
    BOS_TOKEN, DEFAULT_VOCAB_SIZE, EOS, EOS_TOKEN, PAD, PAD_TOKEN, UNK, UNK_TOKEN,
};

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("corpus empty")]
    Empty,
    #[error("corpus has no {0} records")]
    MissingLanguage(Language),
    #[error("vocabulary needs records to count")]
    EmptyRecords,
    #[error("vocabulary max size {0} leaves no room beyond the 4 reserved tokens")]
    VocabularyTooSmall(usize),
    #[error("invalid vocabulary: {0}")]
    InvalidVocabulary(String),
    #[error("cannot encode an empty sequence")]
    EmptySequence,
    #[error("encoded sequence of length {len} exceeds maximum {max}")]
    SequenceTooLong { len: usize, max: usize },
    #[error("comment has no alphanumeric content")]
    NoSummary,
    #[error("invalid concept spec: {0}")]
    InvalidSpec(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Language {
    Source,
    Target,
}

impl Language {
    pub const BOTH: [Language; 2] = [Language::Source, Language::Target];

    pub fn other(self) -> Self {
        match self {
            Language::Source => Language::Target,
            Language::Target => Language::Source,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Language::Source => "SOURCE",
            Language::Target => "TARGET",
        }
    }
}

impl fmt::Display for Language {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Language {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "SOURCE" => Ok(Language::Source),
            "TARGET" => Ok(Language::Target),
            other => Err(format!("unknown language tag `{other}` (expected SOURCE or TARGET)")),
        }
    }
}

/// One ⟨API sequence, description⟩ pair.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SnippetRecord {
    pub id: String,
    pub language: Language,
    pub api_sequence: Vec<String>,
    pub description: Vec<String>,
    pub provenance: Option<String>,
}

impl SnippetRecord {
    /// Renders the record as one corpus-file line (no trailing newline).
    pub fn to_line(&self) -> String {
        let mut line = format!(
            "{}\t{}\t{}\t{}",
            self.id,
            self.language,
            self.api_sequence.join(" "),
            self.description.join(" ")
        );
        if let Some(p) = &self.provenance {
            line.push('\t');
            line.push_str(p);
        }
        line
    }

    fn parse(line: &str, line_no: usize) -> Result<Self, CorpusError> {
        let malformed = |reason: String| CorpusError::Malformed {
            line: line_no,
            reason,
        };
        let fields: Vec<&str> = line.split('\t').collect();
        if !(4..=5).contains(&fields.len()) {
            return Err(malformed(format!(
                "expected 4 or 5 tab-separated fields, found {}",
                fields.len()
            )));
        }
        let id = fields[0].trim();
        if id.is_empty() || id.contains(char::is_whitespace) {
            return Err(malformed("record id must be a non-empty token".into()));
        }
        let language = fields[1].trim().parse().map_err(malformed)?;
        let api_sequence: Vec<String> =
            fields[2].split_whitespace().map(str::to_string).collect();
        if api_sequence.is_empty() {
            return Err(malformed("empty API sequence".into()));
        }
        let description: Vec<String> = fields[3]
            .split_whitespace()
            .map(str::to_lowercase)
            .collect();
        if description.is_empty() {
            return Err(malformed("empty description".into()));
        }
        let provenance = fields
            .get(4)
            .map(|p| p.trim().to_string())
            .filter(|p| !p.is_empty());
        Ok(Self {
            id: id.to_string(),
            language,
            api_sequence,
            description,
            provenance,
        })
    }
}

/// Length caps, vocabulary size and duplicate handling for a corpus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct CorpusConfig {
    pub max_api_len: usize,
    pub max_desc_len: usize,
    pub api_vocab_size: usize,
    pub word_vocab_size: usize,
    /// Drop records whose (language, API sequence, description) repeats an
    /// earlier record.
    pub dedup: bool,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        Self {
            max_api_len: 30,
            max_desc_len: 30,
            api_vocab_size: DEFAULT_VOCAB_SIZE,
            word_vocab_size: DEFAULT_VOCAB_SIZE,
            dedup: false,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LanguageCounts {
    pub kept: usize,
    pub dropped: usize,
    pub duplicates: usize,
}

/// What happened to each parsed record during loading.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoadReport {
    pub parsed: usize,
    pub source: LanguageCounts,
    pub target: LanguageCounts,
}

impl LoadReport {
    pub fn counts(&self, lang: Language) -> &LanguageCounts {
        match lang {
            Language::Source => &self.source,
            Language::Target => &self.target,
        }
    }

    fn counts_mut(&mut self, lang: Language) -> &mut LanguageCounts {
        match lang {
            Language::Source => &mut self.source,
            Language::Target => &mut self.target,
        }
    }

    pub fn kept(&self) -> usize {
        self.source.kept + self.target.kept
    }

    pub fn dropped(&self) -> usize {
        self.source.dropped + self.target.dropped
    }

    pub fn duplicates(&self) -> usize {
        self.source.duplicates + self.target.duplicates
    }
}

impl fmt::Display for LoadReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "parsed {} records", self.parsed)?;
        for lang in Language::BOTH {
            let c = self.counts(lang);
            write!(
                f,
                "; {lang}: kept {} dropped {} duplicates {}",
                c.kept, c.dropped, c.duplicates
            )?;
        }
        Ok(())
    }
}

/// Records plus the API and word vocabularies built from them.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub records: Vec<SnippetRecord>,
    pub api_vocab: Vocabulary,
    pub word_vocab: Vocabulary,
    pub config: CorpusConfig,
}

impl Corpus {
    /// Filters `records` by the length caps (and optional dedup) and builds
    /// both vocabularies from what remains.
    pub fn from_records(
        records: Vec<SnippetRecord>,
        config: CorpusConfig,
    ) -> Result<(Self, LoadReport), CorpusError> {
        let mut report = LoadReport {
            parsed: records.len(),
            ..Default::default()
        };
        let mut seen = HashSet::new();
        let mut kept = Vec::with_capacity(records.len());
        for r in records {
            if r.api_sequence.len() > config.max_api_len
                || r.description.len() > config.max_desc_len
            {
                report.counts_mut(r.language).dropped += 1;
                continue;
            }
            if config.dedup
                && !seen.insert((r.language, r.api_sequence.clone(), r.description.clone()))
            {
                report.counts_mut(r.language).duplicates += 1;
                continue;
            }
            report.counts_mut(r.language).kept += 1;
            kept.push(r);
        }
        // An all-dropped corpus still gets (reserved-only) vocabularies.
        let api_vocab = vocab::vocabulary_from(&kept, Modality::Api, config.api_vocab_size)?;
        let word_vocab = vocab::vocabulary_from(&kept, Modality::Word, config.word_vocab_size)?;
        Ok((
            Self {
                records: kept,
                api_vocab,
                word_vocab,
                config,
            },
            report,
        ))
    }

    /// Builds a corpus over `records` using existing vocabularies (for
    /// embedding data with a trained model).
    pub fn with_vocabularies(
        records: Vec<SnippetRecord>,
        api_vocab: Vocabulary,
        word_vocab: Vocabulary,
        config: CorpusConfig,
    ) -> Self {
        Self {
            records,
            api_vocab,
            word_vocab,
            config,
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn count(&self, lang: Language) -> usize {
        self.records.iter().filter(|r| r.language == lang).count()
    }

    pub fn records_of(&self, lang: Language) -> impl Iterator<Item = &SnippetRecord> {
        self.records.iter().filter(move |r| r.language == lang)
    }

    /// Errors unless both languages have at least one record.
    pub fn require_both_languages(&self) -> Result<(), CorpusError> {
        for lang in Language::BOTH {
            if self.count(lang) == 0 {
                return Err(CorpusError::MissingLanguage(lang));
            }
        }
        Ok(())
    }

    pub fn encode_api(&self, record: &SnippetRecord) -> Result<EncodedSequence, CorpusError> {
        encode_sequence(
            &record.api_sequence,
            &self.api_vocab,
            self.config.max_api_len,
            Side::Encoder,
        )
    }

    pub fn encode_description(
        &self,
        record: &SnippetRecord,
    ) -> Result<EncodedSequence, CorpusError> {
        encode_sequence(
            &record.description,
            &self.word_vocab,
            self.config.max_desc_len + 2,
            Side::Decoder,
        )
    }

    pub fn write(&self, path: &Path) -> Result<(), CorpusError> {
        write_records(path, &self.records)
    }
}

/// Parses corpus-file text. Duplicate record ids are rejected.
pub fn parse_records(text: &str) -> Result<Vec<SnippetRecord>, CorpusError> {
    let mut ids = HashSet::new();
    let mut records = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let trimmed = line.trim_end_matches('\r');
        if trimmed.trim().is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let r = SnippetRecord::parse(trimmed, line_no)?;
        if !ids.insert(r.id.clone()) {
            return Err(CorpusError::Malformed {
                line: line_no,
                reason: format!("duplicate record id `{}`", r.id),
            });
        }
        records.push(r);
    }
    Ok(records)
}

/// Loads a corpus file, dropping records longer than the configured caps.
///
/// A file without any records is an error. A corpus whose records were all
/// dropped is returned as-is; callers that train check
/// [`Corpus::require_both_languages`].
pub fn load_corpus(path: &Path, config: CorpusConfig) -> Result<(Corpus, LoadReport), CorpusError> {
    let text = fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let records = parse_records(&text)?;
    if records.is_empty() {
        return Err(CorpusError::Empty);
    }
    Corpus::from_records(records, config)
}

pub fn write_records(path: &Path, records: &[SnippetRecord]) -> Result<(), CorpusError> {
    let io = |source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut w = BufWriter::new(fs::File::create(path).map_err(io)?);
    for r in records {
        writeln!(w, "{}", r.to_line()).map_err(io)?;
    }
    w.flush().map_err(io)
}
