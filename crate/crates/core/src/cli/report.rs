use std::time::{SystemTime, UNIX_EPOCH};

use super::{CliError, StageExt};
use crate::alignment::AccuracyReport;
use crate::corpus::{Corpus, Language};
use crate::evaluation::{self, CostModel, EvalReport, Granularity, GroundTruthSet, MappingSet};
use crate::phrase_miner::{self, LengthBuckets, MappingRule};
use crate::seq2seq::{JointModel, TrainingLog};

/// Scores of migrating sequences by rule lookup.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MigrationOutcome {
    pub cost_model: CostModel,
    pub sequences: usize,
    pub edit_distance_ratio: f64,
    pub correctness: f64,
    /// Correctness came from supplied judgments rather than exact match.
    pub judged: bool,
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(|| "-".to_string(), |v| format!("{v:.4}"))
}

pub(crate) fn accuracy_line(label: &str, acc: &AccuracyReport) -> String {
    format!(
        "{label} accuracy source-to-target {} target-to-source {} mean {}",
        opt(acc.source),
        opt(acc.target),
        opt(acc.mean)
    )
}

/// Plain-text report: titled sections followed by `key=value` lines.
#[derive(Debug, Clone, Default)]
pub struct Report {
    generated_at: Option<u64>,
    sections: Vec<(String, Vec<String>)>,
    values: Vec<(String, String)>,
}

impl Report {
    pub fn new(timestamps: bool) -> Self {
        let generated_at = timestamps.then(|| {
            SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map_or(0, |d| d.as_secs())
        });
        Self {
            generated_at,
            ..Self::default()
        }
    }

    pub fn section(&mut self, title: &str, lines: Vec<String>) {
        self.sections.push((title.to_string(), lines));
    }

    pub fn value(&mut self, key: impl Into<String>, value: impl ToString) {
        self.values.push((key.into(), value.to_string()));
    }

    pub fn corpus(&mut self, corpus: &Corpus) {
        let (s, t) = (corpus.count(Language::Source), corpus.count(Language::Target));
        self.section(
            "corpus",
            vec![format!("records: {s} SOURCE, {t} TARGET")],
        );
        self.value("corpus.source_records", s);
        self.value("corpus.target_records", t);
    }

    pub fn training(&mut self, model: &JointModel, log: &TrainingLog) {
        let mut lines = vec![format!(
            "hidden units {}, layers {}, cell {:?}, epochs trained {}",
            model.config.hidden_units,
            model.config.num_layers,
            model.config.cell,
            model.epochs_trained()
        )];
        if let Some(l) = log.initial_loss {
            lines.push(format!("initial per-token loss {l:.6}"));
            self.value("training.initial_loss", format!("{l:.9}"));
        }
        if let (Some(first), Some(last)) = (model.history.first(), model.history.last()) {
            lines.push(format!("epoch {} per-token loss {:.6}", first.epoch, first.mean_loss));
            lines.push(format!("epoch {} per-token loss {:.6}", last.epoch, last.mean_loss));
            self.value("training.final_loss", format!("{:.9}", last.mean_loss));
        }
        if log.stopped_early {
            lines.push("stopped early on a loss plateau".to_string());
        }
        self.value("training.epochs", model.epochs_trained());
        self.section("training", lines);
    }

    pub fn alignment(&mut self, neural: &AccuracyReport, ir: &AccuracyReport) {
        let mut lines = vec![format!(
            "{:<8} {:>16} {:>16} {:>8}",
            "method", "source-to-target", "target-to-source", "mean"
        )];
        for (name, acc) in [("neural", neural), ("ir", ir)] {
            lines.push(format!(
                "{:<8} {:>16} {:>16} {:>8}",
                name,
                opt(acc.source),
                opt(acc.target),
                opt(acc.mean)
            ));
            self.value(format!("alignment.{name}.source_to_target"), opt(acc.source));
            self.value(format!("alignment.{name}.target_to_source"), opt(acc.target));
            self.value(format!("alignment.{name}.mean"), opt(acc.mean));
        }
        lines.push("accuracy = share of pairs whose two records express the same concept".to_string());
        self.section("alignment accuracy", lines);
    }

    pub fn rules(&mut self, rules: &[MappingRule]) {
        let buckets = LengthBuckets::of(rules);
        let mut lines = vec![format!("total rules: {}", buckets.total())];
        self.value("rules.total", buckets.total());
        for (label, n) in buckets.labelled() {
            lines.push(format!("source phrase length {label}: {n}"));
            self.value(format!("rules.length_{label}"), n);
        }
        self.section("mapping rules", lines);
    }

    /// Scores one-to-one mappings at method and class level.
    pub fn mappings(&mut self, rules: &[MappingRule], truth: &GroundTruthSet) -> Result<(), CliError> {
        let mined = phrase_miner::one_to_one_mappings(rules);
        let truths = [
            (Granularity::Method, truth.clone()),
            (Granularity::Class, truth.to_class_level()),
        ];
        for (g, t) in truths {
            let report: EvalReport =
                evaluation::score_mappings(&MappingSet::from_mined(&mined, g), &t).stage("eval")?;
            self.section(
                &format!("{g}-level mappings"),
                report.table().lines().map(String::from).collect(),
            );
            self.values.extend(report.key_values(&format!("mappings.{g}")));
        }
        Ok(())
    }

    pub fn migration(&mut self, m: &MigrationOutcome) {
        let basis = if m.judged { "supplied judgments" } else { "exact match" };
        let mut lines = vec![
            format!("sequences: {}", m.sequences),
            format!(
                "edit distance ratio ({} cost model): {:.6}",
                m.cost_model, m.edit_distance_ratio
            ),
        ];
        if m.edit_distance_ratio <= 1.0 {
            lines.push(format!("  as a percentage: {:.2}%", 100.0 * m.edit_distance_ratio));
        }
        lines.push(format!("correctness ({basis}): {:.6}", m.correctness));
        self.section("migration", lines);
        self.value("migration.sequences", m.sequences);
        self.value("migration.cost_model", m.cost_model);
        self.value("migration.edit_distance_ratio", format!("{:.6}", m.edit_distance_ratio));
        self.value("migration.correctness", format!("{:.6}", m.correctness));
    }

    pub fn render(&self) -> String {
        let mut out = String::from("apimap report\n");
        out.push_str(
            "note: correctness is measured by exact match against synthetic ground truth, \
             standing in for manual judgment\n",
        );
        if let Some(t) = self.generated_at {
            out.push_str(&format!("generated_at_unix: {t}\n"));
        }
        for (title, lines) in &self.sections {
            out.push_str(&format!("\n== {title} ==\n"));
            for l in lines {
                out.push_str(l);
                out.push('\n');
            }
        }
        out.push_str("\n== key-values ==\n");
        for (k, v) in &self.values {
            out.push_str(&format!("{k}={v}\n"));
        }
        out
    }
}
