//! Encoder configuration, classification strategies, prediction, and
//! checkpointing.
//!
//! Two strategies share the same encoder and head machinery:
//!
//! * `binary_relevance` — four fully independent (encoder, single-logit
//!   head) classifiers, one per label;
//! * `multi_label` — one shared encoder with a four-logit head.
//!
//! Either way each label gets an independent sigmoid probability; nothing
//! forces the four probabilities to sum to one.

mod encoder;
pub mod params;

use std::fmt;
use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;
use std::str::FromStr;

use ndarray::Array1;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Document};
use crate::label::{Label, LabelSet};
use crate::tokenizer::TokenSequence;

pub use encoder::{encode, gelu, gelu_grad};
pub(crate) use encoder::{backward_pooled, encode_cached, EncodeCache};
pub use params::{init_params, EncoderParams, HeadParams, TensorKind};

/// Architecture hyperparameters plus the init seed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncoderConfig {
    pub num_layers: usize,
    pub hidden: usize,
    pub heads: usize,
    pub ff: usize,
    pub max_positions: usize,
    pub vocab: usize,
    pub seed: u64,
}

impl EncoderConfig {
    /// Compact defaults: 2 layers, hidden 64, 4 heads, feed-forward 256,
    /// 512 positions. Trains in minutes on a laptop core.
    pub fn compact(vocab: usize, seed: u64) -> EncoderConfig {
        EncoderConfig {
            num_layers: 2,
            hidden: 64,
            heads: 4,
            ff: 256,
            max_positions: 512,
            vocab,
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |msg: &str| Err(ModelError::BadConfig(msg.to_string()));
        if self.hidden == 0 || self.heads == 0 || self.ff == 0 || self.max_positions == 0 {
            return bad("dimensions must be positive");
        }
        if !self.hidden.is_multiple_of(self.heads) {
            return bad("heads must divide hidden size");
        }
        if self.vocab < crate::tokenizer::RESERVED.len() {
            return bad("vocab must cover the reserved token ids");
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("invalid config: {0}")]
    BadConfig(String),
    #[error("token id {id} out of range for vocabulary size {vocab}")]
    TokenOutOfRange { id: u32, vocab: usize },
    #[error("sequence length {len} exceeds max positions {max}")]
    TooLong { len: usize, max: usize },
    #[error("cannot encode an empty sequence")]
    EmptySequence,
    #[error("invalid checkpoint: {0}")]
    BadCheckpoint(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

/// The two classification strategies under comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    BinaryRelevance,
    MultiLabel,
}

impl Strategy {
    pub const ALL: [Strategy; 2] = [Strategy::BinaryRelevance, Strategy::MultiLabel];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::BinaryRelevance => "binary_relevance",
            Strategy::MultiLabel => "multi_label",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Strategy, String> {
        match s {
            "binary_relevance" => Ok(Strategy::BinaryRelevance),
            "multi_label" => Ok(Strategy::MultiLabel),
            other => Err(format!(
                "unknown strategy {other:?}; expected binary_relevance or multi_label"
            )),
        }
    }
}

/// One encoder plus one linear head.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Classifier {
    pub encoder: EncoderParams,
    pub head: HeadParams,
}

impl Classifier {
    /// Raw head logits for a tokenized document.
    pub fn logits(&self, seq: &TokenSequence) -> Result<Array1<f64>, ModelError> {
        let pooled = encode(&self.encoder, seq)?;
        Ok(head_logits(&self.head, &pooled))
    }

    fn validate(&self, expected_outputs: usize) -> Result<(), ModelError> {
        self.encoder.validate_shapes()?;
        if self.head.outputs() != expected_outputs {
            return Err(ModelError::BadCheckpoint(format!(
                "head has {} outputs, expected {expected_outputs}",
                self.head.outputs()
            )));
        }
        if self.head.weight.ncols() != self.encoder.config.hidden {
            return Err(ModelError::BadCheckpoint(
                "head width does not match encoder hidden size".to_string(),
            ));
        }
        Ok(())
    }
}

/// `logits = weight · pooled + bias`.
pub fn head_logits(head: &HeadParams, pooled: &Array1<f64>) -> Array1<f64> {
    head.weight.dot(pooled) + &head.bias
}

/// Backward through the head: accumulates head gradients, returns the
/// gradient on the pooled vector.
pub(crate) fn head_backward(
    head: &HeadParams,
    pooled: &Array1<f64>,
    d_logits: &Array1<f64>,
    head_grads: &mut HeadParams,
) -> Array1<f64> {
    let (outputs, hidden) = head.weight.dim();
    for o in 0..outputs {
        head_grads.bias[o] += d_logits[o];
        for j in 0..hidden {
            head_grads.weight[[o, j]] += d_logits[o] * pooled[j];
        }
    }
    head.weight.t().dot(d_logits)
}

/// A trained model for one strategy.
// Variant sizes differ by design: one holds a Vec, the other an inline
// classifier; bundles are created once per run, never in bulk.
#[allow(clippy::large_enum_variant)]
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "strategy")]
pub enum ModelBundle {
    /// Four independent classifiers, indexed in canonical label order.
    #[serde(rename = "binary_relevance")]
    BinaryRelevance { classifiers: Vec<Classifier> },
    /// One shared encoder with a four-logit head.
    #[serde(rename = "multi_label")]
    MultiLabel { classifier: Classifier },
}

impl ModelBundle {
    pub fn strategy(&self) -> Strategy {
        match self {
            ModelBundle::BinaryRelevance { .. } => Strategy::BinaryRelevance,
            ModelBundle::MultiLabel { .. } => Strategy::MultiLabel,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        match self {
            ModelBundle::BinaryRelevance { classifiers } => {
                if classifiers.len() != Label::COUNT {
                    return Err(ModelError::BadCheckpoint(format!(
                        "binary_relevance bundle has {} classifiers, expected {}",
                        classifiers.len(),
                        Label::COUNT
                    )));
                }
                for c in classifiers {
                    c.validate(1)?;
                }
            }
            ModelBundle::MultiLabel { classifier } => classifier.validate(Label::COUNT)?,
        }
        Ok(())
    }

    /// Encoder parameters only, heads excluded. A binary-relevance bundle
    /// carries exactly four times the encoder parameters of a multi-label
    /// bundle over the same config.
    pub fn encoder_parameter_count(&self) -> usize {
        match self {
            ModelBundle::BinaryRelevance { classifiers } => classifiers
                .iter()
                .map(|c| c.encoder.parameter_count())
                .sum(),
            ModelBundle::MultiLabel { classifier } => classifier.encoder.parameter_count(),
        }
    }
}

/// Numerically stable logistic function.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Per-label probabilities for a tokenized document, one sigmoid per label.
pub fn predict(bundle: &ModelBundle, seq: &TokenSequence) -> Result<[f64; Label::COUNT], ModelError> {
    let mut probs = [0.0; Label::COUNT];
    match bundle {
        ModelBundle::BinaryRelevance { classifiers } => {
            assert_eq!(classifiers.len(), Label::COUNT, "bundle invariant");
            for (i, classifier) in classifiers.iter().enumerate() {
                let logits = classifier.logits(seq)?;
                probs[i] = sigmoid(logits[0]);
            }
        }
        ModelBundle::MultiLabel { classifier } => {
            let logits = classifier.logits(seq)?;
            for i in 0..Label::COUNT {
                probs[i] = sigmoid(logits[i]);
            }
        }
    }
    Ok(probs)
}

/// Decision rule: include a label iff its probability is at least `tau`.
pub fn threshold(probs: &[f64; Label::COUNT], tau: f64) -> LabelSet {
    assert!(
        (0.0..=1.0).contains(&tau),
        "threshold must lie in [0, 1], got {tau}"
    );
    let mut set = LabelSet::EMPTY;
    for (i, &p) in probs.iter().enumerate() {
        debug_assert!((0.0..=1.0).contains(&p));
        if p >= tau {
            set.insert(Label::ALL[i]);
        }
    }
    set
}

/// Default decision threshold.
pub const DEFAULT_TAU: f64 = 0.5;

/// Project a multi-label corpus onto one label: one row per document with a
/// binary target.
pub fn binary_relevance_transform(corpus: &Corpus, label: Label) -> Vec<(&Document, bool)> {
    corpus
        .iter()
        .map(|doc| (doc, doc.gold.contains(label)))
        .collect()
}

const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    version: u32,
    bundle: ModelBundle,
}

/// Write a bundle to a versioned JSON checkpoint. f64 values survive the
/// round trip bit-exactly.
pub fn save_bundle(bundle: &ModelBundle, path: &Path) -> Result<(), ModelError> {
    let file = File::create(path)?;
    let writer = BufWriter::new(file);
    serde_json::to_writer(
        writer,
        &Checkpoint {
            version: CHECKPOINT_VERSION,
            bundle: bundle.clone(),
        },
    )?;
    Ok(())
}

/// Load and validate a checkpoint written by [`save_bundle`].
pub fn load_bundle(path: &Path) -> Result<ModelBundle, ModelError> {
    let file = File::open(path)?;
    let reader = BufReader::new(file);
    let checkpoint: Checkpoint = serde_json::from_reader(reader)?;
    if checkpoint.version != CHECKPOINT_VERSION {
        return Err(ModelError::BadCheckpoint(format!(
            "unsupported checkpoint version {}",
            checkpoint.version
        )));
    }
    checkpoint.bundle.validate()?;
    Ok(checkpoint.bundle)
}
