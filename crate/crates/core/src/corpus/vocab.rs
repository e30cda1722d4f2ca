use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{CorpusError, SnippetRecord};

pub const PAD: usize = 0;
pub const UNK: usize = 1;
pub const BOS: usize = 2;
pub const EOS: usize = 3;

pub const PAD_TOKEN: &str = "<pad>";
pub const UNK_TOKEN: &str = "<unk>";
pub const BOS_TOKEN: &str = "<s>";
pub const EOS_TOKEN: &str = "</s>";

const RESERVED: [&str; 4] = [PAD_TOKEN, UNK_TOKEN, BOS_TOKEN, EOS_TOKEN];

pub const DEFAULT_VOCAB_SIZE: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modality {
    Api,
    Word,
}

/// Bidirectional token/index map. Indices 0..4 are reserved for
/// `<pad>`, `<unk>`, `<s>` and `</s>`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "VocabularyRepr", into = "VocabularyRepr")]
pub struct Vocabulary {
    modality: Modality,
    max_size: usize,
    index_to_token: Vec<String>,
    token_to_index: HashMap<String, usize>,
}

#[derive(Serialize, Deserialize)]
struct VocabularyRepr {
    modality: Modality,
    max_size: usize,
    tokens: Vec<String>,
}

impl From<Vocabulary> for VocabularyRepr {
    fn from(v: Vocabulary) -> Self {
        Self {
            modality: v.modality,
            max_size: v.max_size,
            tokens: v.index_to_token,
        }
    }
}

impl TryFrom<VocabularyRepr> for Vocabulary {
    type Error = CorpusError;

    fn try_from(r: VocabularyRepr) -> Result<Self, Self::Error> {
        Vocabulary::from_tokens(r.modality, r.max_size, r.tokens)
    }
}

impl Vocabulary {
    /// A vocabulary holding only the reserved tokens.
    pub fn reserved_only(modality: Modality, max_size: usize) -> Self {
        let tokens: Vec<String> = RESERVED.iter().map(|s| s.to_string()).collect();
        let token_to_index = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        Self {
            modality,
            max_size,
            index_to_token: tokens,
            token_to_index,
        }
    }

    /// Rebuilds a vocabulary from its index-ordered token list.
    pub fn from_tokens(
        modality: Modality,
        max_size: usize,
        tokens: Vec<String>,
    ) -> Result<Self, CorpusError> {
        if tokens.len() < RESERVED.len()
            || tokens[..RESERVED.len()].iter().zip(RESERVED).any(|(a, b)| a != b)
        {
            return Err(CorpusError::InvalidVocabulary(
                "reserved tokens missing or out of order".into(),
            ));
        }
        if tokens.len() > max_size {
            return Err(CorpusError::InvalidVocabulary(format!(
                "{} tokens exceed max size {max_size}",
                tokens.len()
            )));
        }
        let mut token_to_index = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if token_to_index.insert(t.clone(), i).is_some() {
                return Err(CorpusError::InvalidVocabulary(format!("duplicate token `{t}`")));
            }
        }
        Ok(Self {
            modality,
            max_size,
            index_to_token: tokens,
            token_to_index,
        })
    }

    pub fn modality(&self) -> Modality {
        self.modality
    }

    pub fn max_size(&self) -> usize {
        self.max_size
    }

    pub fn len(&self) -> usize {
        self.index_to_token.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index_to_token.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.index_to_token
    }

    /// Index of `token`, or `UNK` when out of vocabulary.
    pub fn index(&self, token: &str) -> usize {
        self.token_to_index.get(token).copied().unwrap_or(UNK)
    }

    pub fn get(&self, token: &str) -> Option<usize> {
        self.token_to_index.get(token).copied()
    }

    pub fn token(&self, index: usize) -> Option<&str> {
        self.index_to_token.get(index).map(String::as_str)
    }

    /// Maps indices back to tokens, dropping `<pad>`, `<s>` and `</s>`.
    pub fn decode(&self, indices: &[usize]) -> Vec<String> {
        indices
            .iter()
            .filter(|&&i| i != PAD && i != BOS && i != EOS)
            .map(|&i| self.token(i).unwrap_or(UNK_TOKEN).to_string())
            .collect()
    }
}

/// Builds a frequency-ranked vocabulary from the API tokens or description
/// words of `records`.
///
/// Ties in frequency are broken lexicographically; only the top
/// `max_size - 4` tokens are kept.
pub fn build_vocabulary(
    records: &[SnippetRecord],
    modality: Modality,
    max_size: usize,
) -> Result<Vocabulary, CorpusError> {
    if records.is_empty() {
        return Err(CorpusError::EmptyRecords);
    }
    vocabulary_from(records, modality, max_size)
}

pub(crate) fn vocabulary_from(
    records: &[SnippetRecord],
    modality: Modality,
    max_size: usize,
) -> Result<Vocabulary, CorpusError> {
    if max_size <= RESERVED.len() {
        return Err(CorpusError::VocabularyTooSmall(max_size));
    }
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for r in records {
        let tokens = match modality {
            Modality::Api => &r.api_sequence,
            Modality::Word => &r.description,
        };
        for t in tokens {
            *counts.entry(t.as_str()).or_default() += 1;
        }
    }
    let mut ranked: Vec<(&str, usize)> = counts
        .into_iter()
        .filter(|(t, _)| !RESERVED.contains(t))
        .collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    ranked.truncate(max_size - RESERVED.len());

    let mut vocab = Vocabulary::reserved_only(modality, max_size);
    for (t, _) in ranked {
        vocab.token_to_index.insert(t.to_string(), vocab.index_to_token.len());
        vocab.index_to_token.push(t.to_string());
    }
    Ok(vocab)
}

/// Which side of the model a sequence feeds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    /// Encoder input: bare token indices.
    Encoder,
    /// Decoder target: wrapped in `<s> … </s>`.
    Decoder,
}

/// Fixed-length index sequence with a mask marking real positions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncodedSequence {
    pub indices: Vec<usize>,
    pub mask: Vec<bool>,
}

impl EncodedSequence {
    /// Number of real (unmasked) positions.
    pub fn real_len(&self) -> usize {
        self.mask.iter().filter(|m| **m).count()
    }

    /// Indices at real positions.
    pub fn real(&self) -> Vec<usize> {
        self.indices
            .iter()
            .zip(&self.mask)
            .filter(|(_, m)| **m)
            .map(|(i, _)| *i)
            .collect()
    }

    /// Appends `extra` padding positions.
    pub fn padded(&self, extra: usize) -> Self {
        let mut out = self.clone();
        out.indices.extend(std::iter::repeat_n(PAD, extra));
        out.mask.extend(std::iter::repeat_n(false, extra));
        out
    }
}

/// Encodes `tokens` against `vocab`, padding to `max_len`.
///
/// `max_len` bounds the full encoded length, including `<s>`/`</s>` on the
/// decoder side.
pub fn encode_sequence<S: AsRef<str>>(
    tokens: &[S],
    vocab: &Vocabulary,
    max_len: usize,
    side: Side,
) -> Result<EncodedSequence, CorpusError> {
    if tokens.is_empty() {
        return Err(CorpusError::EmptySequence);
    }
    let mut indices = Vec::with_capacity(max_len);
    if side == Side::Decoder {
        indices.push(BOS);
    }
    indices.extend(tokens.iter().map(|t| vocab.index(t.as_ref())));
    if side == Side::Decoder {
        indices.push(EOS);
    }
    if indices.len() > max_len {
        return Err(CorpusError::SequenceTooLong {
            len: indices.len(),
            max: max_len,
        });
    }
    let real = indices.len();
    indices.resize(max_len, PAD);
    let mask = (0..max_len).map(|i| i < real).collect();
    Ok(EncodedSequence { indices, mask })
}
