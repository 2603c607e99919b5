//! Pre-norm transformer encoder: embedding, masked multi-head attention,
//! GELU feed-forward, and the hand-derived backward pass.
//!
//! Layout convention: activations are `[positions, features]`; weights are
//! applied on the right (`x · W + b`). Padded key positions receive an
//! additive -inf before softmax, so they carry exactly zero attention
//! weight and the CLS output is independent of padding.

use ndarray::{s, Array1, Array2, Axis, Zip};

use crate::tokenizer::TokenSequence;

use super::params::{EncoderParams, LayerNorm};
use super::ModelError;

/// Layer-norm variance epsilon.
const LN_EPS: f64 = 1e-5;

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
const GELU_A: f64 = 0.044_715;

/// Tanh-approximate GELU.
pub fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + (GELU_C * (x + GELU_A * x * x * x)).tanh())
}

/// Derivative of [`gelu`].
pub fn gelu_grad(x: f64) -> f64 {
    let u = GELU_C * (x + GELU_A * x * x * x);
    let t = u.tanh();
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * GELU_C * (1.0 + 3.0 * GELU_A * x * x)
}

pub(crate) struct LnCache {
    xhat: Array2<f64>,
    rstd: Array1<f64>,
}

pub(crate) struct LayerCache {
    ln1: LnCache,
    h1: Array2<f64>,
    q: Array2<f64>,
    k: Array2<f64>,
    v: Array2<f64>,
    /// Softmaxed attention weights, one [n, n] matrix per head.
    attn: Vec<Array2<f64>>,
    context: Array2<f64>,
    ln2: LnCache,
    h2: Array2<f64>,
    ff_pre: Array2<f64>,
    ff_act: Array2<f64>,
}

pub(crate) struct EncodeCache {
    ids: Vec<usize>,
    layers: Vec<LayerCache>,
    final_ln: LnCache,
}

impl EncodeCache {
    #[cfg(test)]
    pub(crate) fn attention(&self, layer: usize) -> &[Array2<f64>] {
        &self.layers[layer].attn
    }
}

fn layer_norm_forward(x: &Array2<f64>, ln: &LayerNorm) -> (Array2<f64>, LnCache) {
    let (n, d) = x.dim();
    let mut xhat = Array2::zeros((n, d));
    let mut rstd = Array1::zeros(n);
    let mut y = Array2::zeros((n, d));
    for i in 0..n {
        let row = x.row(i);
        let mean = row.sum() / d as f64;
        let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d as f64;
        let r = 1.0 / (var + LN_EPS).sqrt();
        rstd[i] = r;
        for j in 0..d {
            let h = (row[j] - mean) * r;
            xhat[[i, j]] = h;
            y[[i, j]] = h * ln.scale[j] + ln.shift[j];
        }
    }
    (y, LnCache { xhat, rstd })
}

/// Backward through layer norm; accumulates parameter gradients and returns
/// the input gradient. Zero rows of `dy` stay zero.
fn layer_norm_backward(
    dy: &Array2<f64>,
    ln: &LayerNorm,
    cache: &LnCache,
    d_scale: &mut Array1<f64>,
    d_shift: &mut Array1<f64>,
) -> Array2<f64> {
    let (n, d) = dy.dim();
    let mut dx = Array2::zeros((n, d));
    for i in 0..n {
        let dy_row = dy.row(i);
        let xhat_row = cache.xhat.row(i);
        let mut mean_g = 0.0;
        let mut mean_gx = 0.0;
        for j in 0..d {
            d_scale[j] += dy_row[j] * xhat_row[j];
            d_shift[j] += dy_row[j];
            let g = dy_row[j] * ln.scale[j];
            mean_g += g;
            mean_gx += g * xhat_row[j];
        }
        mean_g /= d as f64;
        mean_gx /= d as f64;
        let r = cache.rstd[i];
        for j in 0..d {
            let g = dy_row[j] * ln.scale[j];
            dx[[i, j]] = r * (g - mean_g - xhat_row[j] * mean_gx);
        }
    }
    dx
}

/// Row softmax in place. -inf entries become exactly zero.
fn softmax_rows(scores: &mut Array2<f64>) {
    for mut row in scores.rows_mut() {
        let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        debug_assert!(max.is_finite(), "softmax row fully masked");
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
}

/// Forward pass keeping every intermediate needed by the backward pass.
pub(crate) fn encode_cached(
    params: &EncoderParams,
    seq: &TokenSequence,
) -> Result<(Array1<f64>, EncodeCache), ModelError> {
    let c = &params.config;
    let n = seq.ids.len();
    if n == 0 {
        return Err(ModelError::EmptySequence);
    }
    if n > c.max_positions {
        return Err(ModelError::TooLong {
            len: n,
            max: c.max_positions,
        });
    }
    let mut ids = Vec::with_capacity(n);
    for &id in &seq.ids {
        if id as usize >= c.vocab {
            return Err(ModelError::TokenOutOfRange { id, vocab: c.vocab });
        }
        ids.push(id as usize);
    }
    debug_assert!(seq.mask[0], "CLS position must be valid");

    let d = c.hidden;
    let heads = c.heads;
    let dh = d / heads;
    let scale = 1.0 / (dh as f64).sqrt();

    let mut x = Array2::zeros((n, d));
    for (i, &id) in ids.iter().enumerate() {
        let mut row = x.row_mut(i);
        row.assign(&params.token_embed.row(id));
        row += &params.pos_embed.row(i);
    }

    let mut layer_caches = Vec::with_capacity(params.layers.len());
    for layer in &params.layers {
        let (h1, ln1) = layer_norm_forward(&x, &layer.ln1);
        let mut q = h1.dot(&layer.wq);
        q += &layer.bq;
        let mut k = h1.dot(&layer.wk);
        k += &layer.bk;
        let mut v = h1.dot(&layer.wv);
        v += &layer.bv;

        let mut attn = Vec::with_capacity(heads);
        let mut context = Array2::zeros((n, d));
        for h in 0..heads {
            let qh = q.slice(s![.., h * dh..(h + 1) * dh]);
            let kh = k.slice(s![.., h * dh..(h + 1) * dh]);
            let vh = v.slice(s![.., h * dh..(h + 1) * dh]);
            let mut scores = qh.dot(&kh.t());
            scores *= scale;
            for (j, &valid) in seq.mask.iter().enumerate() {
                if !valid {
                    scores.column_mut(j).fill(f64::NEG_INFINITY);
                }
            }
            softmax_rows(&mut scores);
            context
                .slice_mut(s![.., h * dh..(h + 1) * dh])
                .assign(&scores.dot(&vh));
            attn.push(scores);
        }
        let mut out = context.dot(&layer.wo);
        out += &layer.bo;
        let x_mid = &x + &out;

        let (h2, ln2) = layer_norm_forward(&x_mid, &layer.ln2);
        let mut ff_pre = h2.dot(&layer.w1);
        ff_pre += &layer.b1;
        let ff_act = ff_pre.mapv(gelu);
        let mut x_out = ff_act.dot(&layer.w2);
        x_out += &layer.b2;
        x_out += &x_mid;

        layer_caches.push(LayerCache {
            ln1,
            h1,
            q,
            k,
            v,
            attn,
            context,
            ln2,
            h2,
            ff_pre,
            ff_act,
        });
        x = x_out;
    }

    let (y, final_ln) = layer_norm_forward(&x, &params.final_ln);
    let pooled = y.row(0).to_owned();
    Ok((
        pooled,
        EncodeCache {
            ids,
            layers: layer_caches,
            final_ln,
        },
    ))
}

/// Pooled representation of a tokenized document: the final-layer-norm
/// hidden state at the CLS position.
pub fn encode(params: &EncoderParams, seq: &TokenSequence) -> Result<Array1<f64>, ModelError> {
    encode_cached(params, seq).map(|(pooled, _)| pooled)
}

/// Backward from a gradient on the pooled vector; accumulates into `grads`
/// (same shapes as `params`, typically from `zeros_like`).
pub(crate) fn backward_pooled(
    params: &EncoderParams,
    cache: &EncodeCache,
    d_pooled: &Array1<f64>,
    grads: &mut EncoderParams,
) {
    let c = &params.config;
    let n = cache.ids.len();
    let d = c.hidden;
    let heads = c.heads;
    let dh = d / heads;
    let scale = 1.0 / (dh as f64).sqrt();

    // Pooling reads row 0 of the final layer-norm output.
    let mut dy = Array2::zeros((n, d));
    dy.row_mut(0).assign(d_pooled);
    let mut dx = layer_norm_backward(
        &dy,
        &params.final_ln,
        &cache.final_ln,
        &mut grads.final_ln.scale,
        &mut grads.final_ln.shift,
    );

    for ((layer, lc), g) in params
        .layers
        .iter()
        .zip(&cache.layers)
        .zip(grads.layers.iter_mut())
        .rev()
    {
        // Feed-forward block: x_out = x_mid + gelu(h2·W1 + b1)·W2 + b2.
        let mut d_pre = dx.dot(&layer.w2.t());
        g.w2 += &lc.ff_act.t().dot(&dx);
        g.b2 += &dx.sum_axis(Axis(0));
        Zip::from(&mut d_pre)
            .and(&lc.ff_pre)
            .for_each(|dp, &p| *dp *= gelu_grad(p));
        g.w1 += &lc.h2.t().dot(&d_pre);
        g.b1 += &d_pre.sum_axis(Axis(0));
        let dh2 = d_pre.dot(&layer.w1.t());
        let d_mid_ln = layer_norm_backward(&dh2, &layer.ln2, &lc.ln2, &mut g.ln2.scale, &mut g.ln2.shift);
        let d_mid = &dx + &d_mid_ln;

        // Attention block: x_mid = x_in + context·Wo + bo.
        let d_ctx = d_mid.dot(&layer.wo.t());
        g.wo += &lc.context.t().dot(&d_mid);
        g.bo += &d_mid.sum_axis(Axis(0));
        let mut dq = Array2::zeros((n, d));
        let mut dk = Array2::zeros((n, d));
        let mut dv = Array2::zeros((n, d));
        for h in 0..heads {
            let a = &lc.attn[h];
            let dc_h = d_ctx.slice(s![.., h * dh..(h + 1) * dh]);
            let qh = lc.q.slice(s![.., h * dh..(h + 1) * dh]);
            let kh = lc.k.slice(s![.., h * dh..(h + 1) * dh]);
            let vh = lc.v.slice(s![.., h * dh..(h + 1) * dh]);
            dv.slice_mut(s![.., h * dh..(h + 1) * dh])
                .assign(&a.t().dot(&dc_h));
            // Softmax backward: ds = a ⊙ (da − rowsum(da ⊙ a)).
            let mut ds = dc_h.dot(&vh.t());
            for i in 0..n {
                let mut dot = 0.0;
                for j in 0..n {
                    dot += ds[[i, j]] * a[[i, j]];
                }
                for j in 0..n {
                    ds[[i, j]] = a[[i, j]] * (ds[[i, j]] - dot);
                }
            }
            let mut t = ds.dot(&kh);
            t *= scale;
            dq.slice_mut(s![.., h * dh..(h + 1) * dh]).assign(&t);
            let mut t = ds.t().dot(&qh);
            t *= scale;
            dk.slice_mut(s![.., h * dh..(h + 1) * dh]).assign(&t);
        }
        g.wq += &lc.h1.t().dot(&dq);
        g.bq += &dq.sum_axis(Axis(0));
        g.wk += &lc.h1.t().dot(&dk);
        g.bk += &dk.sum_axis(Axis(0));
        g.wv += &lc.h1.t().dot(&dv);
        g.bv += &dv.sum_axis(Axis(0));
        let dh1 = dq.dot(&layer.wq.t()) + dk.dot(&layer.wk.t()) + dv.dot(&layer.wv.t());
        let d_in_ln = layer_norm_backward(&dh1, &layer.ln1, &lc.ln1, &mut g.ln1.scale, &mut g.ln1.shift);
        dx = &d_mid + &d_in_ln;
    }

    for (i, &id) in cache.ids.iter().enumerate() {
        let row = dx.row(i);
        let mut t = grads.token_embed.row_mut(id);
        t += &row;
        let mut p = grads.pos_embed.row_mut(i);
        p += &row;
    }
}
