//! Command-line driver: one subcommand per stage plus an end-to-end run.
//!
//! Exit codes: 0 success, 2 usage or configuration error, 3 data error,
//! 4 numeric failure.

mod config;
mod report;
mod stages;

use std::ffi::OsString;
use std::fmt::Display;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

pub use config::{EvaluationConfig, MiningConfig, PathsConfig, PipelineConfig, SynthConfig};
pub use report::Report;
pub use stages::{
    align_corpus, evaluate_migration, ground_truth_from_spec, load_migration_pairs, mine_rules,
    run_pipeline, synthesize, train_model, write_migration_pairs, write_train_log, PipelineOutputs,
    SynthArtifacts, SynthPaths,
};

use crate::alignment::{self, AlignError, Direction};
use crate::corpus::{self, ConceptAssignments, CorpusError};
use crate::evaluation::{CostModel, EvalError, Granularity, GroundTruthSet};
use crate::phrase_miner::{self, MinerError};
use crate::seq2seq::{self, Seq2SeqError};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{stage}: {message}")]
    Config { stage: &'static str, message: String },
    #[error("{stage}: {message}")]
    Data { stage: &'static str, message: String },
    #[error("{stage}: {message}")]
    Numeric { stage: &'static str, message: String },
}

impl CliError {
    pub fn config(stage: &'static str, message: impl Into<String>) -> Self {
        Self::Config {
            stage,
            message: message.into(),
        }
    }

    pub fn data(stage: &'static str, message: impl Into<String>) -> Self {
        Self::Data {
            stage,
            message: message.into(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config { .. } => 2,
            Self::Data { .. } => 3,
            Self::Numeric { .. } => 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ErrorClass {
    Config,
    Data,
    Numeric,
}

trait Classify: Display {
    fn class(&self) -> ErrorClass;
}

impl Classify for CorpusError {
    fn class(&self) -> ErrorClass {
        match self {
            CorpusError::InvalidSpec(_) | CorpusError::VocabularyTooSmall(_) => ErrorClass::Config,
            _ => ErrorClass::Data,
        }
    }
}

impl Classify for Seq2SeqError {
    fn class(&self) -> ErrorClass {
        match self {
            Seq2SeqError::Config(_) => ErrorClass::Config,
            Seq2SeqError::NonFinite { .. } => ErrorClass::Numeric,
            _ => ErrorClass::Data,
        }
    }
}

impl Classify for AlignError {
    fn class(&self) -> ErrorClass {
        match self {
            AlignError::InvalidMinScore(_) | AlignError::UnknownDirection(_) => ErrorClass::Config,
            _ => ErrorClass::Data,
        }
    }
}

impl Classify for MinerError {
    fn class(&self) -> ErrorClass {
        match self {
            MinerError::InvalidThreshold(_) | MinerError::ZeroPhraseLen => ErrorClass::Config,
            _ => ErrorClass::Data,
        }
    }
}

impl Classify for EvalError {
    fn class(&self) -> ErrorClass {
        ErrorClass::Data
    }
}

/// Attaches a stage name to a module error.
trait StageExt<T> {
    fn stage(self, stage: &'static str) -> Result<T, CliError>;
}

impl<T, E: Classify> StageExt<T> for Result<T, E> {
    fn stage(self, stage: &'static str) -> Result<T, CliError> {
        self.map_err(|e| {
            let message = e.to_string();
            match e.class() {
                ErrorClass::Config => CliError::Config { stage, message },
                ErrorClass::Data => CliError::Data { stage, message },
                ErrorClass::Numeric => CliError::Numeric { stage, message },
            }
        })
    }
}

#[derive(Debug, Parser)]
#[command(name = "apimap", version, about = "Mine API mappings between two languages from code described in natural language")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic bilingual corpus with ground truth.
    Synth(SynthArgs),
    /// Train the joint embedding model on a corpus.
    Train(TrainArgs),
    /// Embed a corpus and pair records across languages.
    Align(AlignArgs),
    /// Mine mapping rules from aligned pairs.
    Mine(MineArgs),
    /// Score mined rules and migrations against ground truth.
    Eval(EvalArgs),
    /// Run every stage and write a single report.
    Pipeline(PipelineArgs),
}

#[derive(Debug, Args)]
struct Common {
    /// TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Leave wall-clock fields out of logs and reports.
    #[arg(long)]
    no_timestamps: bool,
}

#[derive(Debug, Args)]
struct ModelFlags {
    #[arg(long)]
    epochs: Option<usize>,
    /// Recurrent hidden units.
    #[arg(long)]
    hidden: Option<usize>,
}

#[derive(Debug, Args)]
struct AlignFlags {
    /// source-to-target, target-to-source or both.
    #[arg(long)]
    direction: Option<Direction>,
    /// Keep only mutual nearest neighbours.
    #[arg(long)]
    mutual: bool,
}

#[derive(Debug, Args)]
struct MineFlags {
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long)]
    max_phrase_len: Option<usize>,
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[command(flatten)]
    common: Common,
    /// Concept specification file (TOML); the bundled demo when omitted.
    #[arg(long)]
    specs: Option<PathBuf>,
    #[arg(long)]
    n_per_concept: Option<usize>,
    /// Corpus file to write. Truth files go to the same directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    model: ModelFlags,
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// Checkpoint to write.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Training log to write; next to the checkpoint by default.
    #[arg(long)]
    log: Option<PathBuf>,
    /// Continue from this checkpoint.
    #[arg(long)]
    resume: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct AlignArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    align: AlignFlags,
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// Pairs file to write.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Concept assignments; prints alignment accuracy when given.
    #[arg(long)]
    concepts: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct MineArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    mine: MineFlags,
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long)]
    pairs: PathBuf,
    /// Rules file to write.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    rules: PathBuf,
    /// Method-level ground truth; class level is derived from it.
    #[arg(long)]
    truth: Option<PathBuf>,
    /// `source tokens <TAB> target tokens` lines to migrate and score.
    #[arg(long)]
    migration: Option<PathBuf>,
    /// One `true`/`false` judgment per migration line.
    #[arg(long)]
    judgments: Option<PathBuf>,
    /// delete-add or levenshtein.
    #[arg(long)]
    cost_model: Option<CostModel>,
    /// Report file to write; printed only when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct PipelineArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    model: ModelFlags,
    #[command(flatten)]
    align: AlignFlags,
    #[command(flatten)]
    mine: MineFlags,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

fn base_config(common: &Common) -> Result<PipelineConfig, CliError> {
    let mut config = PipelineConfig::load_or_default(common.config.as_deref())?;
    if let Some(seed) = common.seed {
        config.seed = Some(seed);
    }
    if let Some(seed) = config.seed {
        config.model.seed = seed;
    }
    if common.no_timestamps {
        config.timestamps = false;
    }
    Ok(config)
}

impl ModelFlags {
    fn apply(&self, config: &mut PipelineConfig) {
        if let Some(e) = self.epochs {
            config.training.epochs = e;
        }
        if let Some(h) = self.hidden {
            config.model.hidden_units = h;
        }
    }
}

impl AlignFlags {
    fn apply(&self, config: &mut PipelineConfig) {
        if let Some(d) = self.direction {
            config.alignment.direction = d;
        }
        if self.mutual {
            config.alignment.mutual = true;
        }
    }
}

impl MineFlags {
    fn apply(&self, config: &mut PipelineConfig) {
        if let Some(t) = self.threshold {
            config.mining.threshold = t;
        }
        if let Some(m) = self.max_phrase_len {
            config.mining.max_phrase_len = m;
        }
    }
}

fn pick(flag: &Option<PathBuf>, configured: &Option<PathBuf>, what: &str) -> Result<PathBuf, CliError> {
    flag.clone()
        .or_else(|| configured.clone())
        .ok_or_else(|| CliError::config("config", format!("no {what} given (flag or [paths] entry)")))
}

fn ensure_parent(path: &Path) -> Result<(), CliError> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() => fs::create_dir_all(dir)
            .map_err(|e| CliError::data("output", format!("cannot create {}: {e}", dir.display()))),
        _ => Ok(()),
    }
}

fn cmd_synth(args: &SynthArgs) -> Result<(), CliError> {
    let mut config = base_config(&args.common)?;
    if args.specs.is_some() {
        config.paths.specs = args.specs.clone();
    }
    if args.n_per_concept.is_some() {
        config.synth.n_per_concept = args.n_per_concept;
    }
    config.validate()?;
    let out = args
        .out
        .clone()
        .unwrap_or_else(|| config.output_dir().join("corpus.tsv"));
    let artifacts = synthesize(&config)?;
    ensure_parent(&out)?;
    let paths = SynthPaths::beside(&out);
    artifacts.write(&paths)?;
    println!(
        "synth: wrote {} records ({} concepts) to {}",
        artifacts.corpus.len(),
        artifacts.migration.len(),
        out.display()
    );
    Ok(())
}

fn cmd_train(args: &TrainArgs) -> Result<(), CliError> {
    let mut config = base_config(&args.common)?;
    args.model.apply(&mut config);
    if args.resume.is_some() {
        config.paths.resume = args.resume.clone();
    }
    config.validate()?;
    let corpus_path = pick(&args.corpus, &config.paths.corpus, "corpus")?;
    config::require_file(&corpus_path)?;
    let out = args
        .out
        .clone()
        .unwrap_or_else(|| config.output_dir().join("model.ckpt"));
    let log_path = args
        .log
        .clone()
        .unwrap_or_else(|| out.with_file_name("train_log.tsv"));

    let resumed = match &config.paths.resume {
        Some(path) => Some(seq2seq::load_checkpoint(path).stage("train")?),
        None => None,
    };
    let corpus_config = resumed
        .as_ref()
        .map_or_else(|| config.model.corpus_config(), |m| m.config.corpus_config());
    let (corpus, _) = corpus::load_corpus(&corpus_path, corpus_config).stage("train")?;
    let mut model = match resumed {
        Some(m) => m,
        None => stages::starting_model(&config, &corpus)?,
    };
    let log = train_model(&config, &mut model, &corpus, |e| println!("{}", e.to_line()))?;
    ensure_parent(&out)?;
    ensure_parent(&log_path)?;
    seq2seq::save_checkpoint(&model, &out).stage("train")?;
    write_train_log(&log_path, &model)?;
    if let Some(init) = log.initial_loss {
        println!("train: initial per-token loss {init:.6}");
    }
    println!(
        "train: {} epochs in total{}, checkpoint {}",
        model.epochs_trained(),
        if log.stopped_early { " (stopped on plateau)" } else { "" },
        out.display()
    );
    Ok(())
}

fn cmd_align(args: &AlignArgs) -> Result<(), CliError> {
    let mut config = base_config(&args.common)?;
    args.align.apply(&mut config);
    if args.concepts.is_some() {
        config.paths.concepts = args.concepts.clone();
    }
    config.validate()?;
    config::require_file(&args.checkpoint)?;
    let corpus_path = pick(&args.corpus, &config.paths.corpus, "corpus")?;
    config::require_file(&corpus_path)?;
    let out = args
        .out
        .clone()
        .unwrap_or_else(|| config.output_dir().join("pairs.tsv"));

    let model = seq2seq::load_checkpoint(&args.checkpoint).stage("align")?;
    let (corpus, _) =
        corpus::load_corpus(&corpus_path, model.config.corpus_config()).stage("align")?;
    let pairs = align_corpus(&model, &corpus, &config.alignment)?;
    ensure_parent(&out)?;
    alignment::write_pairs(&out, &pairs).stage("align")?;
    println!("align: wrote {} pairs to {}", pairs.len(), out.display());
    if let Some(path) = &config.paths.concepts {
        let truth = ConceptAssignments::load(path).stage("align")?;
        let acc = alignment::alignment_accuracy(&pairs, &truth).stage("align")?;
        println!("align: {}", report::accuracy_line("neural", &acc));
    }
    Ok(())
}

fn cmd_mine(args: &MineArgs) -> Result<(), CliError> {
    let mut config = base_config(&args.common)?;
    args.mine.apply(&mut config);
    config.validate()?;
    let corpus_path = pick(&args.corpus, &config.paths.corpus, "corpus")?;
    config::require_file(&corpus_path)?;
    config::require_file(&args.pairs)?;
    let out = args
        .out
        .clone()
        .unwrap_or_else(|| config.output_dir().join("rules.tsv"));

    let (corpus, _) = corpus::load_corpus(&corpus_path, config.model.corpus_config()).stage("mine")?;
    let pairs = alignment::read_pairs(&args.pairs).stage("mine")?;
    let rules = mine_rules(&corpus, &pairs, &config.mining)?;
    ensure_parent(&out)?;
    phrase_miner::write_rules(&out, &rules).stage("mine")?;
    println!("mine: wrote {} rules to {}", rules.len(), out.display());
    for (label, n) in phrase_miner::LengthBuckets::of(&rules).labelled() {
        println!("mine: source length {label}: {n}");
    }
    Ok(())
}

fn cmd_eval(args: &EvalArgs) -> Result<(), CliError> {
    let mut config = base_config(&args.common)?;
    if args.truth.is_some() {
        config.paths.truth = args.truth.clone();
    }
    if args.migration.is_some() {
        config.paths.migration = args.migration.clone();
    }
    if let Some(c) = args.cost_model {
        config.evaluation.cost_model = c;
    }
    config.validate()?;
    config::require_file(&args.rules)?;
    if let Some(j) = &args.judgments {
        config::require_file(j)?;
    }
    if config.paths.truth.is_none() && config.paths.migration.is_none() {
        return Err(CliError::config("eval", "nothing to score: give --truth and/or --migration"));
    }

    let rules = phrase_miner::read_rules(&args.rules).stage("eval")?;
    let mut report = Report::new(config.timestamps);
    report.rules(&rules);
    if let Some(path) = &config.paths.truth {
        let truth = GroundTruthSet::load(path, Granularity::Method).stage("eval")?;
        report.mappings(&rules, &truth)?;
    }
    if let Some(path) = &config.paths.migration {
        let tests = load_migration_pairs(path)?;
        let judgments = match &args.judgments {
            Some(p) => Some(stages::load_judgments(p)?),
            None => None,
        };
        let outcome = evaluate_migration(&rules, &tests, config.evaluation.cost_model, judgments.as_deref())?;
        report.migration(&outcome);
    }
    let text = report.render();
    if let Some(out) = &args.out {
        ensure_parent(out)?;
        fs::write(out, &text)
            .map_err(|e| CliError::data("eval", format!("cannot write {}: {e}", out.display())))?;
    }
    print!("{text}");
    Ok(())
}

fn cmd_pipeline(args: &PipelineArgs) -> Result<(), CliError> {
    let mut config = base_config(&args.common)?;
    args.model.apply(&mut config);
    args.align.apply(&mut config);
    args.mine.apply(&mut config);
    if args.out_dir.is_some() {
        config.paths.output_dir = args.out_dir.clone();
    }
    config.validate()?;
    let outputs = run_pipeline(&config, |line| println!("{line}"))?;
    println!("pipeline: report written to {}", outputs.report.display());
    Ok(())
}

/// Parses `args` (including the program name) and runs the command,
/// returning the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let result = match &cli.command {
        Command::Synth(a) => cmd_synth(a),
        Command::Train(a) => cmd_train(a),
        Command::Align(a) => cmd_align(a),
        Command::Mine(a) => cmd_mine(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Pipeline(a) => cmd_pipeline(a),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
