//! Parameter containers, deterministic initialization, and flat tensor
//! access used by the optimizer and gradient checking.

use ndarray::{Array1, Array2};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::seeding::{derive_seed_tagged, rng_from};

use super::{EncoderConfig, ModelError};

/// What a tensor is, for init and weight-decay rules: only `Weight` tensors
/// decay; layer-norm scales initialize to one, everything non-weight to zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TensorKind {
    Weight,
    Bias,
    LnScale,
    LnShift,
}

impl TensorKind {
    pub fn decays(self) -> bool {
        matches!(self, TensorKind::Weight)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerNorm {
    pub scale: Array1<f64>,
    pub shift: Array1<f64>,
}

impl LayerNorm {
    fn new(dim: usize) -> LayerNorm {
        LayerNorm {
            scale: Array1::ones(dim),
            shift: Array1::zeros(dim),
        }
    }

    fn zeros(dim: usize) -> LayerNorm {
        LayerNorm {
            scale: Array1::zeros(dim),
            shift: Array1::zeros(dim),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerParams {
    pub ln1: LayerNorm,
    pub wq: Array2<f64>,
    pub bq: Array1<f64>,
    pub wk: Array2<f64>,
    pub bk: Array1<f64>,
    pub wv: Array2<f64>,
    pub bv: Array1<f64>,
    pub wo: Array2<f64>,
    pub bo: Array1<f64>,
    pub ln2: LayerNorm,
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    pub w2: Array2<f64>,
    pub b2: Array1<f64>,
}

/// Full encoder parameter set. The config travels with the tensors so
/// shapes are always interpretable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderParams {
    pub config: EncoderConfig,
    pub token_embed: Array2<f64>,
    pub pos_embed: Array2<f64>,
    pub layers: Vec<LayerParams>,
    pub final_ln: LayerNorm,
}

/// A linear classification head: `logits = weight · pooled + bias`.
/// `outputs()` is 4 for the shared multi-label head, 1 per binary classifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeadParams {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

impl HeadParams {
    pub fn outputs(&self) -> usize {
        self.weight.nrows()
    }

    pub fn tensors(&self) -> Vec<(&[f64], TensorKind)> {
        vec![
            (self.weight.as_slice().unwrap(), TensorKind::Weight),
            (self.bias.as_slice().unwrap(), TensorKind::Bias),
        ]
    }

    pub fn tensors_mut(&mut self) -> Vec<(&mut [f64], TensorKind)> {
        vec![
            (self.weight.as_slice_mut().unwrap(), TensorKind::Weight),
            (self.bias.as_slice_mut().unwrap(), TensorKind::Bias),
        ]
    }

    pub fn zeros_like(&self) -> HeadParams {
        HeadParams {
            weight: Array2::zeros(self.weight.raw_dim()),
            bias: Array1::zeros(self.bias.raw_dim()),
        }
    }

    /// Initialize a head with `outputs` logits over `hidden`-dimensional
    /// pooled vectors; deterministic in `seed`.
    pub fn init(outputs: usize, hidden: usize, seed: u64) -> HeadParams {
        let mut head = HeadParams {
            weight: Array2::zeros((outputs, hidden)),
            bias: Array1::zeros(outputs),
        };
        let mut rng = rng_from(derive_seed_tagged(seed, "head-init", &[]));
        fill_tensors(&mut head.tensors_mut(), &mut rng);
        head
    }
}

/// Standard deviation of the weight init distribution.
pub const INIT_STD: f64 = 0.02;

/// Sample from a normal with standard deviation `std`, resampling anything
/// beyond two standard deviations.
fn truncated_normal<R: Rng>(rng: &mut R, std: f64) -> f64 {
    loop {
        let z: f64 = rng.sample(StandardNormal);
        if z.abs() <= 2.0 {
            return z * std;
        }
    }
}

fn fill_tensors<R: Rng>(tensors: &mut [(&mut [f64], TensorKind)], rng: &mut R) {
    for (slice, kind) in tensors {
        match kind {
            TensorKind::Weight => {
                for value in slice.iter_mut() {
                    *value = truncated_normal(rng, INIT_STD);
                }
            }
            TensorKind::LnScale => slice.fill(1.0),
            TensorKind::Bias | TensorKind::LnShift => slice.fill(0.0),
        }
    }
}

impl EncoderParams {
    /// All tensors in a fixed traversal order: embeddings, then each layer
    /// (ln1, attention projections, ln2, feed-forward), then the final
    /// layer norm. The optimizer's state vectors index this order.
    pub fn tensors(&self) -> Vec<(&[f64], TensorKind)> {
        use TensorKind::*;
        let mut out: Vec<(&[f64], TensorKind)> = vec![
            (self.token_embed.as_slice().unwrap(), Weight),
            (self.pos_embed.as_slice().unwrap(), Weight),
        ];
        for layer in &self.layers {
            out.push((layer.ln1.scale.as_slice().unwrap(), LnScale));
            out.push((layer.ln1.shift.as_slice().unwrap(), LnShift));
            out.push((layer.wq.as_slice().unwrap(), Weight));
            out.push((layer.bq.as_slice().unwrap(), Bias));
            out.push((layer.wk.as_slice().unwrap(), Weight));
            out.push((layer.bk.as_slice().unwrap(), Bias));
            out.push((layer.wv.as_slice().unwrap(), Weight));
            out.push((layer.bv.as_slice().unwrap(), Bias));
            out.push((layer.wo.as_slice().unwrap(), Weight));
            out.push((layer.bo.as_slice().unwrap(), Bias));
            out.push((layer.ln2.scale.as_slice().unwrap(), LnScale));
            out.push((layer.ln2.shift.as_slice().unwrap(), LnShift));
            out.push((layer.w1.as_slice().unwrap(), Weight));
            out.push((layer.b1.as_slice().unwrap(), Bias));
            out.push((layer.w2.as_slice().unwrap(), Weight));
            out.push((layer.b2.as_slice().unwrap(), Bias));
        }
        out.push((self.final_ln.scale.as_slice().unwrap(), LnScale));
        out.push((self.final_ln.shift.as_slice().unwrap(), LnShift));
        out
    }

    /// Mutable variant of [`EncoderParams::tensors`], same order.
    pub fn tensors_mut(&mut self) -> Vec<(&mut [f64], TensorKind)> {
        use TensorKind::*;
        let mut out: Vec<(&mut [f64], TensorKind)> = vec![
            (self.token_embed.as_slice_mut().unwrap(), Weight),
            (self.pos_embed.as_slice_mut().unwrap(), Weight),
        ];
        for layer in &mut self.layers {
            out.push((layer.ln1.scale.as_slice_mut().unwrap(), LnScale));
            out.push((layer.ln1.shift.as_slice_mut().unwrap(), LnShift));
            out.push((layer.wq.as_slice_mut().unwrap(), Weight));
            out.push((layer.bq.as_slice_mut().unwrap(), Bias));
            out.push((layer.wk.as_slice_mut().unwrap(), Weight));
            out.push((layer.bk.as_slice_mut().unwrap(), Bias));
            out.push((layer.wv.as_slice_mut().unwrap(), Weight));
            out.push((layer.bv.as_slice_mut().unwrap(), Bias));
            out.push((layer.wo.as_slice_mut().unwrap(), Weight));
            out.push((layer.bo.as_slice_mut().unwrap(), Bias));
            out.push((layer.ln2.scale.as_slice_mut().unwrap(), LnScale));
            out.push((layer.ln2.shift.as_slice_mut().unwrap(), LnShift));
            out.push((layer.w1.as_slice_mut().unwrap(), Weight));
            out.push((layer.b1.as_slice_mut().unwrap(), Bias));
            out.push((layer.w2.as_slice_mut().unwrap(), Weight));
            out.push((layer.b2.as_slice_mut().unwrap(), Bias));
        }
        out.push((self.final_ln.scale.as_slice_mut().unwrap(), LnScale));
        out.push((self.final_ln.shift.as_slice_mut().unwrap(), LnShift));
        out
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors().iter().map(|(s, _)| s.len()).sum()
    }

    pub fn all_finite(&self) -> bool {
        self.tensors()
            .iter()
            .all(|(s, _)| s.iter().all(|v| v.is_finite()))
    }

    /// A same-shaped parameter set of all zeros, used as a gradient
    /// accumulator.
    pub fn zeros_like(&self) -> EncoderParams {
        let c = &self.config;
        let d = c.hidden;
        EncoderParams {
            config: c.clone(),
            token_embed: Array2::zeros((c.vocab, d)),
            pos_embed: Array2::zeros((c.max_positions, d)),
            layers: (0..c.num_layers)
                .map(|_| LayerParams {
                    ln1: LayerNorm::zeros(d),
                    wq: Array2::zeros((d, d)),
                    bq: Array1::zeros(d),
                    wk: Array2::zeros((d, d)),
                    bk: Array1::zeros(d),
                    wv: Array2::zeros((d, d)),
                    bv: Array1::zeros(d),
                    wo: Array2::zeros((d, d)),
                    bo: Array1::zeros(d),
                    ln2: LayerNorm::zeros(d),
                    w1: Array2::zeros((d, c.ff)),
                    b1: Array1::zeros(c.ff),
                    w2: Array2::zeros((c.ff, d)),
                    b2: Array1::zeros(d),
                })
                .collect(),
            final_ln: LayerNorm::zeros(d),
        }
    }

    /// Check that every tensor's shape matches the config; used after
    /// loading a checkpoint.
    pub fn validate_shapes(&self) -> Result<(), ModelError> {
        let c = &self.config;
        c.validate()?;
        let d = c.hidden;
        let check = |name: &str, ok: bool| {
            if ok {
                Ok(())
            } else {
                Err(ModelError::BadCheckpoint(format!(
                    "tensor {name} has a shape inconsistent with the config"
                )))
            }
        };
        check("token_embed", self.token_embed.dim() == (c.vocab, d))?;
        check("pos_embed", self.pos_embed.dim() == (c.max_positions, d))?;
        check("layers", self.layers.len() == c.num_layers)?;
        for layer in &self.layers {
            check("ln1", layer.ln1.scale.len() == d && layer.ln1.shift.len() == d)?;
            for w in [&layer.wq, &layer.wk, &layer.wv, &layer.wo] {
                check("attention weight", w.dim() == (d, d))?;
            }
            for b in [&layer.bq, &layer.bk, &layer.bv, &layer.bo] {
                check("attention bias", b.len() == d)?;
            }
            check("ln2", layer.ln2.scale.len() == d && layer.ln2.shift.len() == d)?;
            check("w1", layer.w1.dim() == (d, c.ff))?;
            check("b1", layer.b1.len() == c.ff)?;
            check("w2", layer.w2.dim() == (c.ff, d))?;
            check("b2", layer.b2.len() == d)?;
        }
        check(
            "final_ln",
            self.final_ln.scale.len() == d && self.final_ln.shift.len() == d,
        )?;
        Ok(())
    }
}

/// Initialize encoder parameters for `config`: weights from a truncated
/// normal (standard deviation 0.02, cut at two standard deviations), biases
/// and layer-norm shifts zero, layer-norm scales one. Bit-identical for
/// equal configs.
pub fn init_params(config: &EncoderConfig) -> Result<EncoderParams, ModelError> {
    config.validate()?;
    let mut params = template(config);
    let mut rng = rng_from(derive_seed_tagged(config.seed, "encoder-init", &[]));
    fill_tensors(&mut params.tensors_mut(), &mut rng);
    Ok(params)
}

fn template(config: &EncoderConfig) -> EncoderParams {
    let d = config.hidden;
    EncoderParams {
        config: config.clone(),
        token_embed: Array2::zeros((config.vocab, d)),
        pos_embed: Array2::zeros((config.max_positions, d)),
        layers: (0..config.num_layers)
            .map(|_| LayerParams {
                ln1: LayerNorm::new(d),
                wq: Array2::zeros((d, d)),
                bq: Array1::zeros(d),
                wk: Array2::zeros((d, d)),
                bk: Array1::zeros(d),
                wv: Array2::zeros((d, d)),
                bv: Array1::zeros(d),
                wo: Array2::zeros((d, d)),
                bo: Array1::zeros(d),
                ln2: LayerNorm::new(d),
                w1: Array2::zeros((d, config.ff)),
                b1: Array1::zeros(config.ff),
                w2: Array2::zeros((config.ff, d)),
                b2: Array1::zeros(d),
            })
            .collect(),
        final_ln: LayerNorm::new(d),
    }
}
