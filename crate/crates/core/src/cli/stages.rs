use std::collections::HashMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use super::report::{MigrationOutcome, Report};
use super::{CliError, PipelineConfig, StageExt};
use crate::alignment::{self, AlignOptions, AlignedPair, EmbeddingIndex};
use crate::corpus::{self, ConceptAssignments, Corpus, SynthSpec};
use crate::evaluation::{self, CostModel, Granularity, GroundTruthSet};
use crate::phrase_miner::{self, MappingRule};
use crate::seq2seq::{self, EpochLog, JointModel, TrainOptions, TrainingLog};

/// Output of [`synthesize`].
#[derive(Debug, Clone)]
pub struct SynthArtifacts {
    pub corpus: Corpus,
    pub concepts: ConceptAssignments,
    /// Method-level ground truth taken from the concept patterns.
    pub truth: GroundTruthSet,
    /// Each concept's source pattern with its target pattern.
    pub migration: Vec<(Vec<String>, Vec<String>)>,
}

/// Files written by `synth`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SynthPaths {
    pub corpus: PathBuf,
    pub concepts: PathBuf,
    pub truth_method: PathBuf,
    pub truth_class: PathBuf,
    pub migration: PathBuf,
}

impl SynthPaths {
    /// The corpus at `corpus`, the other files in the same directory.
    pub fn beside(corpus: &Path) -> Self {
        let f = |name: &str| corpus.with_file_name(name);
        Self {
            corpus: corpus.to_path_buf(),
            concepts: f("concepts.tsv"),
            truth_method: f("truth_method.tsv"),
            truth_class: f("truth_class.tsv"),
            migration: f("migration_truth.tsv"),
        }
    }
}

impl SynthArtifacts {
    pub fn write(&self, paths: &SynthPaths) -> Result<(), CliError> {
        self.corpus.write(&paths.corpus).stage("synth")?;
        self.concepts.write(&paths.concepts).stage("synth")?;
        self.truth.write(&paths.truth_method).stage("synth")?;
        self.truth.to_class_level().write(&paths.truth_class).stage("synth")?;
        write_migration_pairs(&paths.migration, &self.migration)
    }
}

/// Method-level mappings of every concept, labelled with its package.
pub fn ground_truth_from_spec(spec: &SynthSpec) -> GroundTruthSet {
    let mut truth = GroundTruthSet::new(Granularity::Method);
    for c in &spec.concepts {
        for (s, t) in c.token_mappings() {
            truth.insert(&s, &t, c.package.as_deref());
        }
    }
    truth
}

/// Generates the corpus described by the configured (or bundled) specs.
pub fn synthesize(config: &PipelineConfig) -> Result<SynthArtifacts, CliError> {
    let spec = match &config.paths.specs {
        Some(path) => SynthSpec::load(path).map_err(|e| CliError::config("synth", e.to_string()))?,
        None => corpus::demo_concepts(),
    };
    let seed = config.seed.unwrap_or(spec.seed);
    let n = config.synth.n_per_concept.unwrap_or(spec.n_per_concept);
    let (corpus, _, concepts) =
        corpus::generate_synthetic_corpus(&spec, n, seed, config.model.corpus_config()).stage("synth")?;
    let migration = spec
        .concepts
        .iter()
        .map(|c| (c.source_pattern.clone(), c.target_pattern.clone()))
        .collect();
    Ok(SynthArtifacts {
        corpus,
        concepts,
        truth: ground_truth_from_spec(&spec),
        migration,
    })
}

/// The checkpoint named by `paths.resume`, or a fresh model for `corpus`.
pub(crate) fn starting_model(config: &PipelineConfig, corpus: &Corpus) -> Result<JointModel, CliError> {
    match &config.paths.resume {
        Some(path) => seq2seq::load_checkpoint(path).stage("train"),
        None => JointModel::for_corpus(config.model.clone(), corpus).stage("train"),
    }
}

/// Trains `model` with the configured options.
pub fn train_model<F: FnMut(&EpochLog)>(
    config: &PipelineConfig,
    model: &mut JointModel,
    corpus: &Corpus,
    on_epoch: F,
) -> Result<TrainingLog, CliError> {
    let options = TrainOptions {
        timestamps: config.training.timestamps && config.timestamps,
        ..config.training.clone()
    };
    seq2seq::train_with(model, corpus, &options, on_epoch).stage("train")
}

/// Writes the model's whole epoch history as TSV with a header line.
pub fn write_train_log(path: &Path, model: &JointModel) -> Result<(), CliError> {
    let mut text = String::from("epoch\tmean_loss\tobjective\twall_time\n");
    for e in &model.history {
        text.push_str(&e.to_line());
        text.push('\n');
    }
    fs::write(path, text).map_err(|e| CliError::data("train", format!("cannot write {}: {e}", path.display())))
}

/// Embeds every record and pairs them across languages.
pub fn align_corpus(
    model: &JointModel,
    corpus: &Corpus,
    options: &AlignOptions,
) -> Result<Vec<AlignedPair>, CliError> {
    let vectors = seq2seq::embed_corpus(model, corpus).stage("align")?;
    let (source, target) = EmbeddingIndex::split(&vectors).stage("align")?;
    alignment::align(&source, &target, options).stage("align")
}

/// Counts phrases over the aligned API sequences and keeps rules above the
/// threshold.
pub fn mine_rules(
    corpus: &Corpus,
    pairs: &[AlignedPair],
    mining: &super::MiningConfig,
) -> Result<Vec<MappingRule>, CliError> {
    let options = mining.options();
    options.validate().stage("mine")?;
    let sequences: HashMap<String, Vec<String>> = corpus
        .records
        .iter()
        .map(|r| (r.id.clone(), r.api_sequence.clone()))
        .collect();
    let aligned = alignment::pair_sequences(pairs, &sequences).stage("mine")?;
    let mut counts = phrase_miner::extract_phrase_pairs(&aligned, &options).stage("mine")?;
    if mining.corpus_wide_counts {
        let all: Vec<&[String]> = corpus
            .records_of(corpus::Language::Source)
            .map(|r| r.api_sequence.as_slice())
            .collect();
        counts = counts.with_source_counts(&all, &options);
    }
    phrase_miner::mine_mappings(&counts, options.threshold).stage("mine")
}

/// Writes `source tokens <TAB> target tokens` lines.
pub fn write_migration_pairs(path: &Path, pairs: &[(Vec<String>, Vec<String>)]) -> Result<(), CliError> {
    let io = |e: std::io::Error| CliError::data("output", format!("cannot write {}: {e}", path.display()));
    let mut w = BufWriter::new(fs::File::create(path).map_err(io)?);
    for (s, t) in pairs {
        writeln!(w, "{}\t{}", s.join(" "), t.join(" ")).map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn load_migration_pairs(path: &Path) -> Result<Vec<(Vec<String>, Vec<String>)>, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::data("eval", format!("cannot read {}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let (s, t) = line.split_once('\t').ok_or_else(|| {
            CliError::data("eval", format!("{} line {}: expected two tab-separated fields", path.display(), i + 1))
        })?;
        let split = |x: &str| x.split_whitespace().map(String::from).collect::<Vec<_>>();
        out.push((split(s), split(t)));
    }
    Ok(out)
}

/// One `true`/`false` (or `1`/`0`) per line.
pub(crate) fn load_judgments(path: &Path) -> Result<Vec<bool>, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::data("eval", format!("cannot read {}: {e}", path.display())))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| match l.trim() {
            "true" | "1" => Ok(true),
            "false" | "0" => Ok(false),
            other => Err(CliError::data(
                "eval",
                format!("{} line {}: `{other}` is not a judgment", path.display(), i + 1),
            )),
        })
        .collect()
}

/// Migrates every source sequence by rule lookup and scores the results.
pub fn evaluate_migration(
    rules: &[MappingRule],
    tests: &[(Vec<String>, Vec<String>)],
    cost_model: CostModel,
    judgments: Option<&[bool]>,
) -> Result<MigrationOutcome, CliError> {
    let results: Vec<(Vec<String>, Vec<String>)> = tests
        .iter()
        .map(|(s, t)| (phrase_miner::migrate_sequence(rules, s), t.clone()))
        .collect();
    Ok(MigrationOutcome {
        cost_model,
        sequences: results.len(),
        edit_distance_ratio: evaluation::edit_distance_ratio(&results, cost_model).stage("eval")?,
        correctness: evaluation::correctness(&results, judgments).stage("eval")?,
        judged: judgments.is_some_and(|j| !j.is_empty()),
    })
}

/// Files written by [`run_pipeline`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PipelineOutputs {
    pub dir: PathBuf,
    /// Present when the corpus was generated.
    pub synth: Option<SynthPaths>,
    pub checkpoint: PathBuf,
    pub train_log: PathBuf,
    pub pairs: PathBuf,
    pub rules: PathBuf,
    pub report: PathBuf,
}

/// Runs every stage with a validated config: generate or load the corpus,
/// train, align, mine and evaluate. `progress` receives one line per step.
pub fn run_pipeline<F: FnMut(&str)>(config: &PipelineConfig, mut progress: F) -> Result<PipelineOutputs, CliError> {
    config.validate()?;
    let dir = config.output_dir();
    let out = PipelineOutputs {
        synth: config.paths.corpus.is_none().then(|| SynthPaths::beside(&dir.join("corpus.tsv"))),
        checkpoint: dir.join("model.ckpt"),
        train_log: dir.join("train_log.tsv"),
        pairs: dir.join("pairs.tsv"),
        rules: dir.join("rules.tsv"),
        report: dir.join("report.txt"),
        dir,
    };

    let (corpus, concepts, truth, migration) = match &config.paths.corpus {
        Some(path) => {
            let (corpus, _) = corpus::load_corpus(path, config.model.corpus_config()).stage("load")?;
            let concepts = match &config.paths.concepts {
                Some(p) => Some(ConceptAssignments::load(p).stage("load")?),
                None => None,
            };
            let truth = match &config.paths.truth {
                Some(p) => Some(GroundTruthSet::load(p, Granularity::Method).stage("load")?),
                None => None,
            };
            let migration = match &config.paths.migration {
                Some(p) => Some(load_migration_pairs(p)?),
                None => None,
            };
            (corpus, concepts, truth, migration)
        }
        None => {
            let a = synthesize(config)?;
            fs::create_dir_all(&out.dir)
                .map_err(|e| CliError::data("output", format!("cannot create {}: {e}", out.dir.display())))?;
            let paths = out.synth.as_ref().expect("set when generating");
            a.write(paths)?;
            progress(&format!("synth: {} records -> {}", a.corpus.len(), paths.corpus.display()));
            (a.corpus, Some(a.concepts), Some(a.truth), Some(a.migration))
        }
    };
    fs::create_dir_all(&out.dir)
        .map_err(|e| CliError::data("output", format!("cannot create {}: {e}", out.dir.display())))?;

    let mut model = starting_model(config, &corpus)?;
    let log = train_model(config, &mut model, &corpus, |e| progress(&format!("train: {}", e.to_line())))?;
    seq2seq::save_checkpoint(&model, &out.checkpoint).stage("train")?;
    write_train_log(&out.train_log, &model)?;

    let pairs = align_corpus(&model, &corpus, &config.alignment)?;
    alignment::write_pairs(&out.pairs, &pairs).stage("align")?;
    progress(&format!("align: {} pairs -> {}", pairs.len(), out.pairs.display()));

    let rules = mine_rules(&corpus, &pairs, &config.mining)?;
    phrase_miner::write_rules(&out.rules, &rules).stage("mine")?;
    progress(&format!("mine: {} rules -> {}", rules.len(), out.rules.display()));

    let mut report = Report::new(config.timestamps);
    report.corpus(&corpus);
    report.training(&model, &log);
    if let Some(concepts) = &concepts {
        let vectors = seq2seq::embed_corpus(&model, &corpus).stage("align")?;
        let (source, target) = EmbeddingIndex::split(&vectors).stage("align")?;
        let neural = alignment::bidirectional_accuracy(&source, &target, concepts).stage("align")?;
        let ir = evaluation::ir_baseline_align(&corpus, &config.evaluation.ir).stage("eval")?;
        let ir_acc = alignment::alignment_accuracy(&ir.pairs, concepts).stage("eval")?;
        report.alignment(&neural, &ir_acc);
    }
    report.rules(&rules);
    if let Some(truth) = &truth {
        report.mappings(&rules, truth)?;
    }
    if let Some(tests) = &migration {
        report.migration(&evaluate_migration(&rules, tests, config.evaluation.cost_model, None)?);
    }
    fs::write(&out.report, report.render())
        .map_err(|e| CliError::data("eval", format!("cannot write {}: {e}", out.report.display())))?;
    Ok(out)
}
