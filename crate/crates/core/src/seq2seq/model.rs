use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::train::EpochLog;
use super::{ModelConfig, Seq2SeqError};
use crate::corpus::{
    build_vocabulary, encode_sequence, Corpus, EncodedSequence, Language, Modality, Side,
    SnippetRecord, Vocabulary,
};
use crate::neural::{Gradients, ParamId, ParamStore, RecurrentCell, Tape, Var};

/// Fixed-length encoding of one API sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemanticVector {
    pub record_id: String,
    pub language: Language,
    pub values: Vec<f64>,
}

/// One record encoded against a model's vocabularies.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedPair {
    pub language: Language,
    pub api: EncodedSequence,
    pub description: EncodedSequence,
}

/// Loss of a batch.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossStats {
    /// Mean sequence negative log-likelihood per language, summed over the
    /// two languages.
    pub objective: f64,
    /// Total negative log-likelihood over all predicted tokens.
    pub nll_sum: f64,
    /// Number of predicted tokens.
    pub tokens: usize,
}

impl LossStats {
    pub fn per_token(&self) -> f64 {
        if self.tokens == 0 {
            0.0
        } else {
            self.nll_sum / self.tokens as f64
        }
    }
}

#[derive(Debug, Clone)]
struct Encoder {
    embed: ParamId,
    /// `[forward, backward]` cells per layer.
    layers: Vec<[RecurrentCell; 2]>,
}

#[derive(Debug, Clone)]
struct Decoder {
    embed: ParamId,
    init: Vec<(ParamId, ParamId)>,
    layers: Vec<RecurrentCell>,
    out_w: ParamId,
    out_b: ParamId,
}

/// All trainable parameters plus the vocabularies they were sized for.
#[derive(Debug, Clone)]
pub struct JointModel {
    pub config: ModelConfig,
    pub api_vocab: Vocabulary,
    pub word_vocab: Vocabulary,
    pub store: ParamStore,
    /// Per-epoch log of every epoch trained so far.
    pub history: Vec<EpochLog>,
    encoders: Vec<Encoder>,
    decoder: Decoder,
}

impl JointModel {
    /// Initializes a model with weights drawn from `config.seed`.
    pub fn new(
        config: ModelConfig,
        api_vocab: Vocabulary,
        word_vocab: Vocabulary,
    ) -> Result<Self, Seq2SeqError> {
        config.validate()?;
        if api_vocab.modality() != Modality::Api || word_vocab.modality() != Modality::Word {
            return Err(Seq2SeqError::Config("vocabulary modalities swapped".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut store = ParamStore::new();
        let (e, h, s) = (config.embedding_dim, config.hidden_units, config.init_scale);
        let prefixes: &[&str] = if config.separate_encoders {
            &["enc.src", "enc.tgt"]
        } else {
            &["enc"]
        };
        let mut encoders = Vec::new();
        for prefix in prefixes {
            let embed =
                store.insert_uniform(&format!("{prefix}.embed"), &[api_vocab.len(), e], s, &mut rng)?;
            let mut layers = Vec::new();
            for l in 0..config.num_layers {
                let input = if l == 0 { e } else { 2 * h };
                let mut pair = Vec::with_capacity(2);
                for dir in ["fwd", "bwd"] {
                    pair.push(RecurrentCell::register(
                        &mut store,
                        &format!("{prefix}.l{l}.{dir}"),
                        config.cell,
                        input,
                        h,
                        s,
                        &mut rng,
                    )?);
                }
                layers.push([pair[0], pair[1]]);
            }
            encoders.push(Encoder { embed, layers });
        }

        let embed = store.insert_uniform("dec.embed", &[word_vocab.len(), e], s, &mut rng)?;
        let mut init = Vec::new();
        let mut layers = Vec::new();
        for l in 0..config.num_layers {
            let w = store.insert_uniform(&format!("dec.init.l{l}.w"), &[h, 2 * h], s, &mut rng)?;
            let b = store.insert_uniform(&format!("dec.init.l{l}.b"), &[h], s, &mut rng)?;
            init.push((w, b));
            let input = if l == 0 { e } else { h } + 2 * h;
            layers.push(RecurrentCell::register(
                &mut store,
                &format!("dec.l{l}"),
                config.cell,
                input,
                h,
                s,
                &mut rng,
            )?);
        }
        let out_w = store.insert_uniform("dec.out.w", &[word_vocab.len(), h], s, &mut rng)?;
        let out_b = store.insert_uniform("dec.out.b", &[word_vocab.len()], s, &mut rng)?;

        Ok(Self {
            config,
            api_vocab,
            word_vocab,
            store,
            history: Vec::new(),
            encoders,
            decoder: Decoder {
                embed,
                init,
                layers,
                out_w,
                out_b,
            },
        })
    }

    /// Initializes a model with vocabularies built from `corpus` records,
    /// capped at the sizes in `config`.
    pub fn for_corpus(config: ModelConfig, corpus: &Corpus) -> Result<Self, Seq2SeqError> {
        config.validate()?;
        let api = build_vocabulary(&corpus.records, Modality::Api, config.api_vocab_size)?;
        let word = build_vocabulary(&corpus.records, Modality::Word, config.word_vocab_size)?;
        Self::new(config, api, word)
    }

    pub fn semantic_dim(&self) -> usize {
        self.config.semantic_dim()
    }

    /// Number of epochs trained so far.
    pub fn epochs_trained(&self) -> usize {
        self.history.len()
    }

    pub fn encode_api(&self, tokens: &[String]) -> Result<EncodedSequence, Seq2SeqError> {
        Ok(encode_sequence(
            tokens,
            &self.api_vocab,
            self.config.max_api_len,
            Side::Encoder,
        )?)
    }

    pub fn encode_description(&self, words: &[String]) -> Result<EncodedSequence, Seq2SeqError> {
        Ok(encode_sequence(
            words,
            &self.word_vocab,
            self.config.max_desc_len + 2,
            Side::Decoder,
        )?)
    }

    pub fn encode_record(&self, record: &SnippetRecord) -> Result<EncodedPair, Seq2SeqError> {
        Ok(EncodedPair {
            language: record.language,
            api: self.encode_api(&record.api_sequence)?,
            description: self.encode_description(&record.description)?,
        })
    }

    fn encoder(&self, language: Language) -> &Encoder {
        match (self.encoders.len(), language) {
            (2, Language::Target) => &self.encoders[1],
            _ => &self.encoders[0],
        }
    }

    fn encode_on_tape(
        &self,
        tape: &mut Tape<'_>,
        language: Language,
        api: &EncodedSequence,
    ) -> Result<Var, Seq2SeqError> {
        let real = api.real();
        if real.is_empty() {
            return Err(Seq2SeqError::AllPadding);
        }
        let enc = self.encoder(language);
        let h = self.config.hidden_units;
        let mut inputs = real
            .iter()
            .map(|&i| tape.gather(enc.embed, i))
            .collect::<Result<Vec<_>, _>>()?;
        let n = inputs.len();
        let mut top = None;
        for (l, [fwd, bwd]) in enc.layers.iter().enumerate() {
            let (fb, bb) = (fwd.bias_var(tape), bwd.bias_var(tape));
            let mut fs = Vec::with_capacity(n);
            let mut state = tape.input(vec![0.0; h]);
            for &x in &inputs {
                state = fwd.step(tape, fb, x, state)?;
                fs.push(state);
            }
            let mut bs = vec![state; n];
            let mut state = tape.input(vec![0.0; h]);
            for t in (0..n).rev() {
                state = bwd.step(tape, bb, inputs[t], state)?;
                bs[t] = state;
            }
            if l + 1 == enc.layers.len() {
                top = Some(tape.concat(&[fs[n - 1], bs[0]]));
            } else {
                inputs = (0..n).map(|t| tape.concat(&[fs[t], bs[t]])).collect();
            }
        }
        Ok(top.expect("at least one layer"))
    }

    /// Sum of token negative log-likelihoods of `description` given semantic
    /// vector `a`, with gold previous words as decoder input.
    fn decode_nll(
        &self,
        tape: &mut Tape<'_>,
        a: Var,
        description: &EncodedSequence,
    ) -> Result<(Var, usize), Seq2SeqError> {
        let words = description.real();
        if words.len() < 2 {
            return Err(Seq2SeqError::AllPadding);
        }
        let dec = &self.decoder;
        let mut states = Vec::with_capacity(dec.layers.len());
        for &(w, b) in &dec.init {
            let wa = tape.matvec(w, a)?;
            let bv = tape.param(b);
            let pre = tape.add(wa, bv)?;
            states.push(tape.tanh(pre));
        }
        let biases: Vec<Var> = dec.layers.iter().map(|c| c.bias_var(tape)).collect();
        let out_b = tape.param(dec.out_b);
        let mut total: Option<Var> = None;
        for t in 0..words.len() - 1 {
            let emb = tape.gather(dec.embed, words[t])?;
            let mut x = tape.concat(&[emb, a]);
            for (l, cell) in dec.layers.iter().enumerate() {
                states[l] = cell.step(tape, biases[l], x, states[l])?;
                x = tape.concat(&[states[l], a]);
            }
            let top = *states.last().expect("at least one layer");
            let wh = tape.matvec(dec.out_w, top)?;
            let logits = tape.add(wh, out_b)?;
            let nll = tape.softmax_xent(logits, words[t + 1])?;
            total = Some(match total {
                Some(acc) => tape.add(acc, nll)?,
                None => nll,
            });
        }
        Ok((total.expect("at least one target"), words.len() - 1))
    }

    /// Semantic vector of one encoded API sequence.
    pub fn embed(&self, language: Language, api: &EncodedSequence) -> Result<Vec<f64>, Seq2SeqError> {
        let mut tape = Tape::new(&self.store);
        let v = self.encode_on_tape(&mut tape, language, api)?;
        Ok(tape.value(v).to_vec())
    }

    pub fn embed_record(&self, record: &SnippetRecord) -> Result<SemanticVector, Seq2SeqError> {
        let api = self.encode_api(&record.api_sequence)?;
        Ok(SemanticVector {
            record_id: record.id.clone(),
            language: record.language,
            values: self.embed(record.language, &api)?,
        })
    }

    /// Joint objective of a mixed-language batch.
    pub fn forward_loss(&self, batch: &[EncodedPair]) -> Result<LossStats, Seq2SeqError> {
        self.run_batch(batch, None)
    }

    /// Joint objective and its gradient with respect to every parameter.
    pub fn loss_and_gradients(
        &self,
        batch: &[EncodedPair],
    ) -> Result<(LossStats, Gradients), Seq2SeqError> {
        let mut grads = self.store.zero_gradients();
        let stats = self.run_batch(batch, Some(&mut grads))?;
        Ok((stats, grads))
    }

    fn run_batch(
        &self,
        batch: &[EncodedPair],
        mut grads: Option<&mut Gradients>,
    ) -> Result<LossStats, Seq2SeqError> {
        let mut counts = [0usize; 2];
        for p in batch {
            counts[p.language as usize] += 1;
        }
        for lang in Language::BOTH {
            if counts[lang as usize] == 0 {
                return Err(Seq2SeqError::MissingLanguage(lang));
            }
        }
        let mut stats = LossStats::default();
        for pair in batch {
            let weight = 1.0 / counts[pair.language as usize] as f64;
            let mut tape = Tape::new(&self.store);
            let a = self.encode_on_tape(&mut tape, pair.language, &pair.api)?;
            let (nll, tokens) = self.decode_nll(&mut tape, a, &pair.description)?;
            let value = tape.value(nll)[0];
            stats.objective += weight * value;
            stats.nll_sum += value;
            stats.tokens += tokens;
            if let Some(g) = grads.as_deref_mut() {
                tape.backward_into(nll, weight, g)?;
            }
        }
        Ok(stats)
    }
}

/// Semantic vectors for every record of `corpus`, in record order.
pub fn embed_corpus(model: &JointModel, corpus: &Corpus) -> Result<Vec<SemanticVector>, Seq2SeqError> {
    corpus.records.iter().map(|r| model.embed_record(r)).collect()
}
