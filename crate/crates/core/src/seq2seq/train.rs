use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::model::{EncodedPair, JointModel, LossStats};
use super::Seq2SeqError;
use crate::corpus::{Corpus, CorpusError, Language};
use crate::neural::adadelta_update;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    /// 1-based count over the model's whole training history.
    pub epoch: usize,
    /// Mean negative log-likelihood per predicted token.
    pub mean_loss: f64,
    /// Mean of the per-batch joint objective.
    pub objective: f64,
    /// Seconds spent on the epoch; absent when timestamps are suppressed.
    pub wall_time: Option<f64>,
}

impl EpochLog {
    /// `epoch <TAB> mean_loss <TAB> objective <TAB> wall_time` line.
    pub fn to_line(&self) -> String {
        let wall = match self.wall_time {
            Some(t) => format!("{t:.3}"),
            None => "-".to_string(),
        };
        format!(
            "{}\t{:.9}\t{:.9}\t{}",
            self.epoch, self.mean_loss, self.objective, wall
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainOptions {
    pub epochs: usize,
    /// Stop once the per-token loss improves by less than
    /// `plateau_tolerance` (relative) over `plateau_window` epochs.
    pub early_stop: bool,
    pub plateau_tolerance: f64,
    pub plateau_window: usize,
    /// Evaluate the loss of the model before the first update.
    pub evaluate_initial: bool,
    pub timestamps: bool,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self {
            epochs: 15,
            early_stop: true,
            plateau_tolerance: 1e-4,
            plateau_window: 3,
            evaluate_initial: true,
            timestamps: true,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingLog {
    /// Per-token loss over the whole corpus before this run's first update.
    pub initial_loss: Option<f64>,
    pub epochs: Vec<EpochLog>,
    pub stopped_early: bool,
}

/// Trains `model` on `corpus` for `options.epochs` further epochs.
///
/// Each epoch shuffles each language's pairs independently and fills every
/// batch with `batch_size / 2` pairs per language, wrapping around the
/// smaller language. The shuffle depends only on the seed and the global
/// epoch number, so continuing from a checkpoint repeats the same schedule
/// as an uninterrupted run.
pub fn train(
    model: &mut JointModel,
    corpus: &Corpus,
    options: &TrainOptions,
) -> Result<TrainingLog, Seq2SeqError> {
    train_with(model, corpus, options, |_| {})
}

/// [`train`] with a callback invoked after every epoch.
pub fn train_with<F: FnMut(&EpochLog)>(
    model: &mut JointModel,
    corpus: &Corpus,
    options: &TrainOptions,
    mut on_epoch: F,
) -> Result<TrainingLog, Seq2SeqError> {
    corpus.require_both_languages().map_err(|e| match e {
        CorpusError::MissingLanguage(lang) => Seq2SeqError::MissingLanguage(lang),
        other => other.into(),
    })?;
    let mut log = TrainingLog::default();
    if options.epochs == 0 {
        return Ok(log);
    }
    let mut pools: [Vec<EncodedPair>; 2] = [Vec::new(), Vec::new()];
    for r in &corpus.records {
        pools[r.language as usize].push(model.encode_record(r)?);
    }

    if options.evaluate_initial {
        let all: Vec<EncodedPair> = pools.iter().flatten().cloned().collect();
        let stats = model.forward_loss(&all)?;
        if !stats.per_token().is_finite() {
            return Err(Seq2SeqError::NonFinite {
                epoch: model.epochs_trained(),
            });
        }
        log.initial_loss = Some(stats.per_token());
    }

    let half = model.config.batch_size / 2;
    let longest = pools[0].len().max(pools[1].len());
    let n_batches = longest.div_ceil(half);
    for _ in 0..options.epochs {
        let epoch = model.epochs_trained() + 1;
        let start = Instant::now();
        let mut rng = ChaCha8Rng::seed_from_u64(model.config.seed);
        rng.set_stream(epoch as u64);
        let orders: Vec<Vec<usize>> = pools
            .iter()
            .map(|p| {
                let mut order: Vec<usize> = (0..p.len()).collect();
                order.shuffle(&mut rng);
                order
            })
            .collect();

        let mut totals = LossStats::default();
        let mut batch = Vec::with_capacity(2 * half);
        for b in 0..n_batches {
            batch.clear();
            for lang in Language::BOTH {
                let (pool, order) = (&pools[lang as usize], &orders[lang as usize]);
                for i in 0..half {
                    batch.push(pool[order[(b * half + i) % pool.len()]].clone());
                }
            }
            let (stats, mut grads) = model.loss_and_gradients(&batch)?;
            if !stats.objective.is_finite() || !grads.is_finite() {
                return Err(Seq2SeqError::NonFinite { epoch });
            }
            grads.clip_global_norm(model.config.clip_norm);
            adadelta_update(&mut model.store, &grads, model.config.rho, model.config.epsilon)?;
            totals.objective += stats.objective;
            totals.nll_sum += stats.nll_sum;
            totals.tokens += stats.tokens;
        }
        if !model.store.is_finite() {
            return Err(Seq2SeqError::NonFinite { epoch });
        }

        let entry = EpochLog {
            epoch,
            mean_loss: totals.per_token(),
            objective: totals.objective / n_batches as f64,
            wall_time: options.timestamps.then(|| start.elapsed().as_secs_f64()),
        };
        on_epoch(&entry);
        model.history.push(entry.clone());
        log.epochs.push(entry);

        if options.early_stop && plateaued(&model.history, options) {
            log.stopped_early = true;
            break;
        }
    }
    Ok(log)
}

fn plateaued(history: &[EpochLog], options: &TrainOptions) -> bool {
    let w = options.plateau_window;
    if w == 0 || history.len() <= w {
        return false;
    }
    let now = history[history.len() - 1].mean_loss;
    let before = history[history.len() - 1 - w].mean_loss;
    (before - now) / before.abs().max(f64::MIN_POSITIVE) < options.plateau_tolerance
}
