//! Scoring of mined mappings, migrated sequences and alignments, plus the
//! description-matching baseline.

mod edit;
mod ir;
mod metrics;

use std::path::PathBuf;

use thiserror::Error;

pub use edit::{correctness, edit_distance, edit_distance_ratio, CostModel};
pub use ir::{ir_baseline_align, IrAlignment, IrOptions};
pub use metrics::{
    score_mappings, EvalReport, Granularity, GroundTruthSet, MappingSet, ScoreRow,
};

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("granularity mismatch: mined {mined}, ground truth {truth}")]
    GranularityMismatch {
        mined: Granularity,
        truth: Granularity,
    },
    #[error("ground truth is empty")]
    EmptyTruth,
    #[error("truth sequence {0} is empty")]
    EmptyTruthSequence(usize),
    #[error("nothing to score")]
    NoResults,
    #[error("{judgments} judgments for {results} results")]
    JudgmentCount { judgments: usize, results: usize },
    #[error("corpus has no {0} descriptions left to match")]
    NoDocuments(crate::corpus::Language),
    #[error("cannot access {path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("{file} line {line}: {reason}")]
    Malformed {
        file: String,
        line: usize,
        reason: String,
    },
}
