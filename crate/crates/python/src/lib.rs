use std::path::PathBuf;

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;

use apimap::alignment::{self, AlignOptions, AlignedPair, Direction, EmbeddingIndex};
use apimap::corpus::{
    self as corpus_mod, demo_concepts, generate_synthetic_corpus, ConceptAssignments,
    CorpusConfig, Language,
};
use apimap::evaluation::{self, CostModel, IrOptions};
use apimap::phrase_miner::{self, MappingRule, MiningOptions};
use apimap::seq2seq::{self, JointModel, ModelConfig, TrainOptions};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn parse<T: std::str::FromStr>(s: &str) -> PyResult<T>
where
    T::Err: std::fmt::Display,
{
    s.parse().map_err(value_err)
}

fn language_name(l: Language) -> String {
    l.to_string()
}

type PairTuple = (String, String, f64, String);

fn pair_tuple(p: &AlignedPair) -> PairTuple {
    (p.source_id.clone(), p.target_id.clone(), p.score, language_name(p.query))
}

/// A loaded or synthesized snippet corpus.
#[pyclass(module = "apimap")]
struct Corpus {
    inner: corpus_mod::Corpus,
    concepts: Option<ConceptAssignments>,
}

#[pymethods]
impl Corpus {
    /// Reads a TSV corpus file.
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        let (inner, _) = corpus_mod::load_corpus(&path, CorpusConfig::default())
            .map_err(|e| PyIOError::new_err(e.to_string()))?;
        Ok(Self {
            inner,
            concepts: None,
        })
    }

    /// Generates a corpus from the bundled concept inventory.
    #[staticmethod]
    #[pyo3(signature = (n_per_concept = 50, seed = None))]
    fn synthetic(n_per_concept: usize, seed: Option<u64>) -> PyResult<Self> {
        let spec = demo_concepts();
        let seed = seed.unwrap_or(spec.seed);
        let (inner, _, concepts) =
            generate_synthetic_corpus(&spec, n_per_concept, seed, CorpusConfig::default())
                .map_err(value_err)?;
        Ok(Self {
            inner,
            concepts: Some(concepts),
        })
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn count(&self, language: &str) -> PyResult<usize> {
        Ok(self.inner.count(parse(language)?))
    }

    /// Records as `(id, language, api_sequence, description)` tuples.
    fn records(&self) -> Vec<(String, String, Vec<String>, Vec<String>)> {
        self.inner
            .records
            .iter()
            .map(|r| {
                (
                    r.id.clone(),
                    language_name(r.language),
                    r.api_sequence.clone(),
                    r.description.clone(),
                )
            })
            .collect()
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.inner
            .write(&path)
            .map_err(|e| PyIOError::new_err(e.to_string()))
    }

    /// Alignment accuracy of `pairs` against the concept labels of a
    /// synthetic corpus, as `(source_to_target, target_to_source, mean)`.
    fn accuracy(
        &self,
        pairs: Vec<PairTuple>,
    ) -> PyResult<(Option<f64>, Option<f64>, Option<f64>)> {
        let truth = self
            .concepts
            .as_ref()
            .ok_or_else(|| PyValueError::new_err("corpus has no concept labels"))?;
        let pairs = pairs
            .into_iter()
            .map(|(source_id, target_id, score, query)| {
                Ok(AlignedPair {
                    source_id,
                    target_id,
                    score,
                    query: parse(&query)?,
                })
            })
            .collect::<PyResult<Vec<_>>>()?;
        let r = alignment::alignment_accuracy(&pairs, truth).map_err(value_err)?;
        Ok((r.source, r.target, r.mean))
    }

    /// Description-matching baseline alignment.
    #[pyo3(signature = (direction = "both"))]
    fn ir_align(&self, direction: &str) -> PyResult<Vec<PairTuple>> {
        let options = IrOptions {
            direction: parse(direction)?,
            ..IrOptions::default()
        };
        let out = evaluation::ir_baseline_align(&self.inner, &options).map_err(value_err)?;
        Ok(out.pairs.iter().map(pair_tuple).collect())
    }
}

/// The joint API-sequence / description model.
#[pyclass(module = "apimap")]
struct Model {
    inner: JointModel,
}

#[pymethods]
impl Model {
    #[new]
    #[pyo3(signature = (corpus, hidden_units = 64, embedding_dim = 64, seed = 0))]
    fn new(corpus: &Corpus, hidden_units: usize, embedding_dim: usize, seed: u64) -> PyResult<Self> {
        let config = ModelConfig {
            hidden_units,
            embedding_dim,
            seed,
            ..ModelConfig::default()
        };
        let inner = JointModel::for_corpus(config, &corpus.inner).map_err(value_err)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        let inner = seq2seq::load_checkpoint(&path).map_err(value_err)?;
        Ok(Self { inner })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        seq2seq::save_checkpoint(&self.inner, &path).map_err(value_err)
    }

    /// Trains further and returns the per-token loss of each epoch.
    #[pyo3(signature = (corpus, epochs = 15, early_stop = true))]
    fn train(&mut self, py: Python<'_>, corpus: &Corpus, epochs: usize, early_stop: bool) -> PyResult<Vec<f64>> {
        let options = TrainOptions {
            epochs,
            early_stop,
            timestamps: false,
            ..TrainOptions::default()
        };
        let inner = &mut self.inner;
        let log = py
            .detach(|| seq2seq::train(inner, &corpus.inner, &options))
            .map_err(value_err)?;
        Ok(log.epochs.iter().map(|e| e.mean_loss).collect())
    }

    fn epochs_trained(&self) -> usize {
        self.inner.epochs_trained()
    }

    /// Mean per-token loss over a corpus.
    fn loss(&self, corpus: &Corpus) -> PyResult<f64> {
        let pairs = corpus
            .inner
            .records
            .iter()
            .map(|r| self.inner.encode_record(r))
            .collect::<Result<Vec<_>, _>>()
            .map_err(value_err)?;
        let stats = self.inner.forward_loss(&pairs).map_err(value_err)?;
        Ok(stats.nll_sum / stats.tokens as f64)
    }

    /// Semantic vectors as `(record_id, language, values)` tuples.
    fn embed(&self, corpus: &Corpus) -> PyResult<Vec<(String, String, Vec<f64>)>> {
        let vectors = seq2seq::embed_corpus(&self.inner, &corpus.inner).map_err(value_err)?;
        Ok(vectors
            .into_iter()
            .map(|v| (v.record_id, language_name(v.language), v.values))
            .collect())
    }

    /// Nearest-neighbour alignment of the corpus's two languages.
    #[pyo3(signature = (corpus, direction = "source-to-target", mutual = false))]
    fn align(&self, corpus: &Corpus, direction: &str, mutual: bool) -> PyResult<Vec<PairTuple>> {
        let direction: Direction = parse(direction)?;
        let vectors = seq2seq::embed_corpus(&self.inner, &corpus.inner).map_err(value_err)?;
        let (source, target) = EmbeddingIndex::split(&vectors).map_err(value_err)?;
        let options = AlignOptions {
            direction,
            mutual,
            ..AlignOptions::default()
        };
        let pairs = alignment::align(&source, &target, &options).map_err(value_err)?;
        Ok(pairs.iter().map(pair_tuple).collect())
    }
}

/// A mined phrase mapping.
#[pyclass(module = "apimap", frozen, from_py_object)]
#[derive(Clone)]
struct Rule {
    inner: MappingRule,
}

#[pymethods]
impl Rule {
    #[getter]
    fn source(&self) -> Vec<String> {
        self.inner.source.clone()
    }

    #[getter]
    fn target(&self) -> Vec<String> {
        self.inner.target.clone()
    }

    #[getter]
    fn probability(&self) -> f64 {
        self.inner.probability
    }

    #[getter]
    fn cooccurrence_count(&self) -> u64 {
        self.inner.cooccurrence_count
    }

    #[getter]
    fn source_count(&self) -> u64 {
        self.inner.source_count
    }

    fn __repr__(&self) -> String {
        format!(
            "Rule({} -> {}, p={:.4})",
            self.inner.source.join(" "),
            self.inner.target.join(" "),
            self.inner.probability
        )
    }
}

/// Mines phrase mapping rules from aligned `(source, target)` sequences.
#[pyfunction]
#[pyo3(signature = (pairs, max_phrase_len = 8, threshold = 0.5))]
fn mine(pairs: Vec<(Vec<String>, Vec<String>)>, max_phrase_len: usize, threshold: f64) -> PyResult<Vec<Rule>> {
    let options = MiningOptions {
        max_phrase_len,
        threshold,
        ..MiningOptions::default()
    };
    options.validate().map_err(value_err)?;
    let counts = phrase_miner::extract_phrase_pairs(&pairs, &options).map_err(value_err)?;
    let rules = phrase_miner::mine_mappings(&counts, threshold).map_err(value_err)?;
    Ok(rules.into_iter().map(|inner| Rule { inner }).collect())
}

/// Rewrites a source API sequence using the mined rules.
#[pyfunction]
fn migrate(rules: Vec<Rule>, sequence: Vec<String>) -> Vec<String> {
    let rules: Vec<MappingRule> = rules.into_iter().map(|r| r.inner).collect();
    phrase_miner::migrate_sequence(&rules, &sequence)
}

#[pyfunction]
#[pyo3(signature = (a, b, cost_model = "delete-add"))]
fn edit_distance(a: Vec<String>, b: Vec<String>, cost_model: &str) -> PyResult<usize> {
    let cost: CostModel = parse(cost_model)?;
    Ok(evaluation::edit_distance(&a, &b, cost))
}

/// Total edit distance over total truth length, for `(result, truth)` pairs.
#[pyfunction]
#[pyo3(signature = (pairs, cost_model = "delete-add"))]
fn edit_distance_ratio(pairs: Vec<(Vec<String>, Vec<String>)>, cost_model: &str) -> PyResult<f64> {
    let cost: CostModel = parse(cost_model)?;
    evaluation::edit_distance_ratio(&pairs, cost).map_err(value_err)
}

#[pymodule]
#[pyo3(name = "apimap")]
fn apimap_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Corpus>()?;
    m.add_class::<Model>()?;
    m.add_class::<Rule>()?;
    m.add_function(wrap_pyfunction!(mine, m)?)?;
    m.add_function(wrap_pyfunction!(migrate, m)?)?;
    m.add_function(wrap_pyfunction!(edit_distance, m)?)?;
    m.add_function(wrap_pyfunction!(edit_distance_ratio, m)?)?;
    Ok(())
}
