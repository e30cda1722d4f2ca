//! Joint sequence-to-sequence model: a bidirectional recurrent encoder over
//! API sequences and a recurrent decoder over descriptions, trained on both
//! languages at once so their semantic vectors share one space.

mod checkpoint;
mod model;
mod train;

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{CorpusConfig, CorpusError, Language, DEFAULT_VOCAB_SIZE};
use crate::neural::{CellKind, NeuralError};

pub use checkpoint::{load_checkpoint, save_checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use model::{embed_corpus, EncodedPair, JointModel, LossStats, SemanticVector};
pub use train::{train, train_with, EpochLog, TrainOptions, TrainingLog};

#[derive(Debug, Error)]
pub enum Seq2SeqError {
    #[error("invalid model config: {0}")]
    Config(String),
    #[error(transparent)]
    Neural(#[from] NeuralError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error("no {0} pairs: the joint objective needs a loss term from both languages")]
    MissingLanguage(Language),
    #[error("sequence has no unmasked positions")]
    AllPadding,
    #[error("non-finite loss at epoch {epoch}")]
    NonFinite { epoch: usize },
    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("not a checkpoint file (bad magic bytes)")]
    BadMagic,
    #[error("checkpoint format version {found} is not supported (expected version {expected})")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("checkpoint checksum mismatch")]
    Checksum,
    #[error("checkpoint truncated")]
    Truncated,
    #[error("malformed checkpoint: {0}")]
    MalformedCheckpoint(String),
}

/// Model and training hyper-parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub api_vocab_size: usize,
    pub word_vocab_size: usize,
    pub embedding_dim: usize,
    pub hidden_units: usize,
    pub num_layers: usize,
    pub max_api_len: usize,
    pub max_desc_len: usize,
    /// Pairs per batch, half from each language.
    pub batch_size: usize,
    pub seed: u64,
    pub cell: CellKind,
    /// Use distinct encoder weights for the two languages.
    pub separate_encoders: bool,
    pub init_scale: f64,
    pub clip_norm: f64,
    pub rho: f64,
    pub epsilon: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            api_vocab_size: DEFAULT_VOCAB_SIZE,
            word_vocab_size: DEFAULT_VOCAB_SIZE,
            embedding_dim: 64,
            hidden_units: 64,
            num_layers: 1,
            max_api_len: 30,
            max_desc_len: 30,
            batch_size: 20,
            seed: 0,
            cell: CellKind::Gru,
            separate_encoders: false,
            init_scale: 0.08,
            clip_norm: 5.0,
            rho: 0.95,
            epsilon: 1e-6,
        }
    }
}

impl ModelConfig {
    /// Full-size model: two layers of 1000 units, batches of 200.
    pub fn full_scale() -> Self {
        Self {
            embedding_dim: 1000,
            hidden_units: 1000,
            num_layers: 2,
            batch_size: 200,
            ..Self::default()
        }
    }

    /// Corpus length caps and vocabulary sizes matching this model.
    pub fn corpus_config(&self) -> CorpusConfig {
        CorpusConfig {
            max_api_len: self.max_api_len,
            max_desc_len: self.max_desc_len,
            api_vocab_size: self.api_vocab_size,
            word_vocab_size: self.word_vocab_size,
            dedup: false,
        }
    }

    pub fn validate(&self) -> Result<(), Seq2SeqError> {
        let positive = [
            ("api_vocab_size", self.api_vocab_size),
            ("word_vocab_size", self.word_vocab_size),
            ("embedding_dim", self.embedding_dim),
            ("hidden_units", self.hidden_units),
            ("num_layers", self.num_layers),
            ("max_api_len", self.max_api_len),
            ("max_desc_len", self.max_desc_len),
            ("batch_size", self.batch_size),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(Seq2SeqError::Config(format!("{name} must be positive")));
        }
        if self.batch_size % 2 != 0 {
            return Err(Seq2SeqError::Config(format!(
                "batch_size {} must be even",
                self.batch_size
            )));
        }
        let reals = [
            ("init_scale", self.init_scale),
            ("clip_norm", self.clip_norm),
            ("epsilon", self.epsilon),
        ];
        if let Some((name, _)) = reals.iter().find(|(_, v)| !(v.is_finite() && *v > 0.0)) {
            return Err(Seq2SeqError::Config(format!("{name} must be positive")));
        }
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return Err(Seq2SeqError::Config(format!("rho {} outside (0, 1)", self.rho)));
        }
        Ok(())
    }

    /// Length of every semantic vector.
    pub fn semantic_dim(&self) -> usize {
        2 * self.hidden_units
    }
}
