use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::CliError;
use crate::alignment::AlignOptions;
use crate::evaluation::{CostModel, IrOptions};
use crate::phrase_miner::{CountingMode, MiningOptions};
use crate::seq2seq::{ModelConfig, TrainOptions};

/// Input and output locations. Relative paths in a config file are resolved
/// against the directory holding that file.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsConfig {
    /// Concept specifications for `synth`; the bundled demo when absent.
    pub specs: Option<PathBuf>,
    /// Existing corpus file. When set, the pipeline skips generation.
    pub corpus: Option<PathBuf>,
    /// Record-to-concept assignments, used for alignment accuracy.
    pub concepts: Option<PathBuf>,
    /// Method-level ground-truth mappings.
    pub truth: Option<PathBuf>,
    /// `source tokens <TAB> target tokens` lines for migration scoring.
    pub migration: Option<PathBuf>,
    /// Checkpoint to continue training from.
    pub resume: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    /// Records per concept and language; the spec file's value when absent.
    pub n_per_concept: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MiningConfig {
    pub max_phrase_len: usize,
    pub threshold: f64,
    pub counting: CountingMode,
    /// Count source phrases over every source record of the corpus rather
    /// than over the aligned pairs only.
    pub corpus_wide_counts: bool,
}

impl Default for MiningConfig {
    fn default() -> Self {
        let m = MiningOptions::default();
        Self {
            max_phrase_len: m.max_phrase_len,
            threshold: m.threshold,
            counting: m.counting,
            corpus_wide_counts: false,
        }
    }
}

impl MiningConfig {
    pub fn options(&self) -> MiningOptions {
        MiningOptions {
            max_phrase_len: self.max_phrase_len,
            threshold: self.threshold,
            counting: self.counting,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluationConfig {
    pub cost_model: CostModel,
    pub ir: IrOptions,
}

/// Everything a command needs, read from one TOML file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Overrides both the generator seed and `model.seed` when set.
    pub seed: Option<u64>,
    /// Write wall-clock fields into logs and reports.
    pub timestamps: bool,
    pub paths: PathsConfig,
    pub synth: SynthConfig,
    pub model: ModelConfig,
    pub training: TrainOptions,
    pub alignment: AlignOptions,
    pub mining: MiningConfig,
    pub evaluation: EvaluationConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seed: None,
            timestamps: true,
            paths: PathsConfig::default(),
            synth: SynthConfig::default(),
            model: ModelConfig::default(),
            training: TrainOptions::default(),
            alignment: AlignOptions::default(),
            mining: MiningConfig::default(),
            evaluation: EvaluationConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::config("config", e.to_string()))
    }

    /// Reads a config file and resolves its relative paths.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::config("config", format!("cannot read {}: {e}", path.display())))?;
        let mut config = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        let p = &mut config.paths;
        for slot in [
            &mut p.specs,
            &mut p.corpus,
            &mut p.concepts,
            &mut p.truth,
            &mut p.migration,
            &mut p.resume,
            &mut p.output_dir,
        ] {
            if let Some(rel) = slot.as_mut().filter(|r| r.is_relative()) {
                *rel = base.join(&*rel);
            }
        }
        Ok(config)
    }

    pub fn load_or_default(path: Option<&Path>) -> Result<Self, CliError> {
        path.map_or_else(|| Ok(Self::default()), Self::load)
    }

    pub fn output_dir(&self) -> PathBuf {
        self.paths
            .output_dir
            .clone()
            .unwrap_or_else(|| PathBuf::from("apimap-out"))
    }

    /// Checks every option and that every configured input exists.
    pub fn validate(&self) -> Result<(), CliError> {
        self.model
            .validate()
            .map_err(|e| CliError::config("config", e.to_string()))?;
        self.alignment
            .validate()
            .map_err(|e| CliError::config("config", e.to_string()))?;
        self.mining
            .options()
            .validate()
            .map_err(|e| CliError::config("config", e.to_string()))?;
        if self.training.plateau_window == 0 {
            return Err(CliError::config("config", "training.plateau_window must be at least 1"));
        }
        if !(self.training.plateau_tolerance >= 0.0) {
            return Err(CliError::config("config", "training.plateau_tolerance must be non-negative"));
        }
        if self.synth.n_per_concept == Some(0) {
            return Err(CliError::config("config", "synth.n_per_concept must be at least 1"));
        }
        let p = &self.paths;
        for input in [&p.specs, &p.corpus, &p.concepts, &p.truth, &p.migration, &p.resume]
            .into_iter()
            .flatten()
        {
            require_file(input)?;
        }
        Ok(())
    }
}

pub(crate) fn require_file(path: &Path) -> Result<(), CliError> {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::config(
            "config",
            format!("input file {} does not exist", path.display()),
        ))
    }
}
