//! Fine-tuning loops for both classification strategies.
//!
//! Binary relevance trains four independent classifiers, one per label on its
//! own 0/1 targets; multi-label trains a single classifier against all four
//! targets at once. Both share the same batch machinery: seeded shuffle each
//! epoch, mean binary cross-entropy from logits, one AdamW step per batch.
//! Runs are bit-reproducible from (corpus, configs, seed).

mod adamw;
mod gradcheck;
mod loss;

pub use adamw::{adamw_step, adamw_step_classifier, OptimizerState, ADAM_EPS, BETA1, BETA2};
pub use gradcheck::{grad_check, GradCheckReport, NOISE_FLOOR};
#[doc(hidden)]
pub use gradcheck::grad_check_scaled;
pub use loss::bce_loss;

use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::label::Label;
use crate::model::{
    backward_pooled, encode_cached, head_backward, head_logits, init_params, Classifier,
    EncodeCache, EncoderConfig, HeadParams, ModelBundle, ModelError, Strategy,
};
use crate::seeding::{derive_seed_tagged, rng_from};
use crate::tokenizer::{tokenize, TokenSequence, Vocabulary};

#[derive(Debug, thiserror::Error)]
pub enum TrainError {
    #[error("invalid training config: {0}")]
    BadConfig(String),
    #[error("training corpus is empty")]
    EmptyCorpus,
    #[error("gradient for tensor {tensor} is not finite")]
    NonFiniteGradient { tensor: usize },
    #[error("loss became non-finite at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("loss log: {0}")]
    LossLog(#[from] csv::Error),
}

/// Optimization hyperparameters for one training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub strategy: Strategy,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub weight_decay: f64,
    pub seed: u64,
    #[serde(default = "default_shuffle")]
    pub shuffle: bool,
}

fn default_shuffle() -> bool {
    true
}

impl TrainConfig {
    /// Published regimen for each strategy: binary relevance at learning rate
    /// 1e-5, batch 4, 5 epochs; multi-label at 2e-5, batch 8, 20 epochs;
    /// weight decay 0.01 for both.
    pub fn defaults(strategy: Strategy, seed: u64) -> TrainConfig {
        let (learning_rate, batch_size, epochs) = match strategy {
            Strategy::BinaryRelevance => (1e-5, 4, 5),
            Strategy::MultiLabel => (2e-5, 8, 20),
        };
        TrainConfig {
            strategy,
            learning_rate,
            batch_size,
            epochs,
            weight_decay: 0.01,
            seed,
            shuffle: true,
        }
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |msg: &str| Err(TrainError::BadConfig(msg.to_string()));
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return bad("learning rate must be finite and positive");
        }
        if self.batch_size == 0 {
            return bad("batch size must be at least 1");
        }
        if !(self.weight_decay.is_finite() && self.weight_decay >= 0.0) {
            return bad("weight decay must be finite and non-negative");
        }
        Ok(())
    }
}

/// Mean batch loss for one epoch of one run. `label` is `None` for the joint
/// multi-label run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossRecord {
    pub epoch: usize,
    pub label: Option<Label>,
    pub loss: f64,
}

/// Work counters and loss history for a completed [`train`] call. Pass
/// counters sum over all constituent runs, so binary relevance accrues four
/// encoder passes per document per epoch where multi-label accrues one.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainStats {
    pub encoder_forward_passes: u64,
    pub encoder_backward_passes: u64,
    pub loss_history: Vec<LossRecord>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub bundle: ModelBundle,
    pub stats: TrainStats,
}

/// Trains a model bundle on `corpus` under the configured strategy.
///
/// The encoder init seed in `encoder_config` is replaced by seeds derived
/// from `config.seed`, so a single seed determines the whole run: for binary
/// relevance each label gets its own derived seed and a fresh encoder; the
/// multi-label run derives one. Documents are tokenized unpadded at the
/// encoder's position capacity. Epoch numbering in the loss history starts
/// at 1; `epochs = 0` returns the untrained initialization.
pub fn train(
    corpus: &Corpus,
    vocab: &Vocabulary,
    encoder_config: &EncoderConfig,
    config: &TrainConfig,
) -> Result<TrainOutcome, TrainError> {
    config.validate()?;
    encoder_config.validate()?;
    if corpus.is_empty() {
        return Err(TrainError::EmptyCorpus);
    }
    if encoder_config.vocab != vocab.size() {
        return Err(TrainError::BadConfig(format!(
            "encoder expects vocab of {}, tokenizer has {}",
            encoder_config.vocab,
            vocab.size()
        )));
    }
    if encoder_config.max_positions < 2 {
        return Err(TrainError::BadConfig(
            "encoder needs at least 2 positions for [CLS] and [SEP]".to_string(),
        ));
    }

    let max_len = encoder_config.max_positions;
    let seqs: Vec<TokenSequence> = corpus
        .iter()
        .map(|doc| tokenize(&doc.text, vocab, max_len, false))
        .collect();

    let mut stats = TrainStats::default();
    let bundle = match config.strategy {
        Strategy::MultiLabel => {
            let targets: Vec<Vec<f64>> = corpus
                .iter()
                .map(|doc| {
                    doc.gold
                        .flags()
                        .iter()
                        .map(|&set| if set { 1.0 } else { 0.0 })
                        .collect()
                })
                .collect();
            let mut cfg = encoder_config.clone();
            cfg.seed = derive_seed_tagged(config.seed, "model", &[]);
            let run = run_one(&seqs, &targets, Label::COUNT, &cfg, config, &[], None)?;
            merge_stats(&mut stats, run.1);
            ModelBundle::MultiLabel { classifier: run.0 }
        }
        Strategy::BinaryRelevance => {
            let mut classifiers = Vec::with_capacity(Label::COUNT);
            for label in Label::ALL {
                let targets: Vec<Vec<f64>> = corpus
                    .iter()
                    .map(|doc| vec![if doc.gold.contains(label) { 1.0 } else { 0.0 }])
                    .collect();
                let mut cfg = encoder_config.clone();
                cfg.seed = derive_seed_tagged(config.seed, "label", &[label.index() as u64]);
                let ctx = [label.index() as u64];
                let run = run_one(&seqs, &targets, 1, &cfg, config, &ctx, Some(label))?;
                merge_stats(&mut stats, run.1);
                classifiers.push(run.0);
            }
            ModelBundle::BinaryRelevance { classifiers }
        }
    };
    Ok(TrainOutcome { bundle, stats })
}

fn merge_stats(into: &mut TrainStats, from: TrainStats) {
    into.encoder_forward_passes += from.encoder_forward_passes;
    into.encoder_backward_passes += from.encoder_backward_passes;
    into.loss_history.extend(from.loss_history);
}

/// One optimization run: a fresh classifier fitted to per-document target
/// rows of width `outputs`.
fn run_one(
    seqs: &[TokenSequence],
    targets: &[Vec<f64>],
    outputs: usize,
    encoder_config: &EncoderConfig,
    config: &TrainConfig,
    shuffle_ctx: &[u64],
    label: Option<Label>,
) -> Result<(Classifier, TrainStats), TrainError> {
    let encoder = init_params(encoder_config)?;
    let head = HeadParams::init(outputs, encoder_config.hidden, encoder_config.seed);
    let mut classifier = Classifier { encoder, head };
    let mut state = OptimizerState::for_classifier(&classifier);
    let mut rng = rng_from(derive_seed_tagged(config.seed, "shuffle", shuffle_ctx));
    let mut stats = TrainStats::default();

    let n = seqs.len();
    for epoch in 1..=config.epochs {
        let mut order: Vec<usize> = (0..n).collect();
        if config.shuffle {
            order.shuffle(&mut rng);
        }
        let mut loss_sum = 0.0;
        let mut batches = 0usize;
        for chunk in order.chunks(config.batch_size) {
            let batch_seqs: Vec<&TokenSequence> = chunk.iter().map(|&i| &seqs[i]).collect();
            let mut target_mat = Array2::zeros((chunk.len(), outputs));
            for (bi, &i) in chunk.iter().enumerate() {
                for (o, &y) in targets[i].iter().enumerate() {
                    target_mat[[bi, o]] = y;
                }
            }
            let loss = train_step(
                &mut classifier,
                &mut state,
                &batch_seqs,
                &target_mat,
                config,
                &mut stats,
            )
            .map_err(|e| match e {
                TrainError::NonFiniteLoss { .. } => TrainError::NonFiniteLoss {
                    epoch,
                    batch: batches,
                },
                other => other,
            })?;
            loss_sum += loss;
            batches += 1;
        }
        stats.loss_history.push(LossRecord {
            epoch,
            label,
            loss: loss_sum / batches.max(1) as f64,
        });
    }
    Ok((classifier, stats))
}

/// Forward, loss, backward, and one optimizer step for a single batch.
fn train_step(
    classifier: &mut Classifier,
    state: &mut OptimizerState,
    batch_seqs: &[&TokenSequence],
    targets: &Array2<f64>,
    config: &TrainConfig,
    stats: &mut TrainStats,
) -> Result<f64, TrainError> {
    let (logits, pooled, caches) = forward_logits(classifier, batch_seqs)?;
    stats.encoder_forward_passes += batch_seqs.len() as u64;
    let (loss, d_logits) = bce_loss(&logits, targets);
    if !loss.is_finite() {
        return Err(TrainError::NonFiniteLoss { epoch: 0, batch: 0 });
    }
    let mut grads = zero_grads(classifier);
    backward_logits(classifier, &pooled, &caches, &d_logits, &mut grads);
    stats.encoder_backward_passes += batch_seqs.len() as u64;
    adamw_step_classifier(
        classifier,
        &grads,
        state,
        config.learning_rate,
        config.weight_decay,
    )?;
    Ok(loss)
}

/// Gradient container matching a classifier's shapes.
pub(crate) fn zero_grads(classifier: &Classifier) -> Classifier {
    Classifier {
        encoder: classifier.encoder.zeros_like(),
        head: classifier.head.zeros_like(),
    }
}

/// Logit matrix, per-document pooled vectors, and backward-pass caches for
/// one forward batch.
pub(crate) type ForwardPass = (Array2<f64>, Vec<Array1<f64>>, Vec<EncodeCache>);

/// Encodes a batch and applies the head; returns the `[batch, outputs]` logit
/// matrix plus per-document pooled vectors and caches for the backward pass.
pub(crate) fn forward_logits(
    classifier: &Classifier,
    batch_seqs: &[&TokenSequence],
) -> Result<ForwardPass, ModelError> {
    let outputs = classifier.head.outputs();
    let mut logits = Array2::zeros((batch_seqs.len(), outputs));
    let mut pooled = Vec::with_capacity(batch_seqs.len());
    let mut caches = Vec::with_capacity(batch_seqs.len());
    for (bi, seq) in batch_seqs.iter().enumerate() {
        let (p, cache) = encode_cached(&classifier.encoder, seq)?;
        logits.row_mut(bi).assign(&head_logits(&classifier.head, &p));
        pooled.push(p);
        caches.push(cache);
    }
    Ok((logits, pooled, caches))
}

/// Accumulates parameter gradients for a batch given the loss gradient on the
/// logit matrix.
pub(crate) fn backward_logits(
    classifier: &Classifier,
    pooled: &[Array1<f64>],
    caches: &[EncodeCache],
    d_logits: &Array2<f64>,
    grads: &mut Classifier,
) {
    for bi in 0..pooled.len() {
        let dl = d_logits.row(bi).to_owned();
        let d_pooled = head_backward(&classifier.head, &pooled[bi], &dl, &mut grads.head);
        backward_pooled(&classifier.encoder, &caches[bi], &d_pooled, &mut grads.encoder);
    }
}

/// Writes the per-epoch loss log as CSV with columns
/// `epoch, strategy, label, loss`; the label column reads `ALL` for the
/// joint multi-label run.
pub fn write_loss_log<W: std::io::Write>(
    out: W,
    strategy: Strategy,
    history: &[LossRecord],
) -> Result<(), TrainError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["epoch", "strategy", "label", "loss"])?;
    for rec in history {
        let label = rec.label.map_or("ALL", |l| l.name());
        w.write_record([
            rec.epoch.to_string(),
            strategy.name().to_string(),
            label.to_string(),
            rec.loss.to_string(),
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}
