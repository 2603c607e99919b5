//! Central-difference verification of the analytic gradients.

use ndarray::Array2;

use crate::label::Label;
use crate::model::{Classifier, ModelBundle, ModelError};
use crate::tokenizer::TokenSequence;

use super::loss::bce_loss;
use super::{backward_logits, forward_logits, zero_grads, TrainError};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckReport {
    /// Max over sampled coordinates of `|g_a − g_n| / max(|g_a|, |g_n|, 1e-8)`.
    pub max_rel_error: f64,
    pub coordinates_checked: usize,
}

/// Compares the analytic gradient of the batch loss against central
/// differences of step `h`, sampling up to `samples_per_tensor` coordinates
/// from every parameter tensor (all coordinates of smaller tensors).
///
/// Sampling takes the largest-magnitude analytic coordinates of each tensor,
/// skipping any below [`NOISE_FLOOR`]: a wrong backward formula corrupts the
/// large coordinates proportionally, while a difference quotient at step h
/// resolves the loss only to about one ulp over 2h (5e-12 for an order-one
/// loss at h=1e-5), so coordinates near that scale measure rounding noise
/// rather than anything about the formula.
///
/// For binary relevance, each of the four classifiers is checked against its
/// own label column; the report is the worst case over classifiers.
pub fn grad_check(
    bundle: &ModelBundle,
    batch: &[(TokenSequence, [f64; Label::COUNT])],
    h: f64,
    samples_per_tensor: usize,
) -> Result<GradCheckReport, TrainError> {
    grad_check_inner(bundle, batch, h, samples_per_tensor, None)
}

/// Like [`grad_check`] but scales every analytic gradient by `scale` first.
/// Any scale other than 1 must be detected; exists so callers can prove the
/// check is sensitive. Not part of the stable interface.
#[doc(hidden)]
pub fn grad_check_scaled(
    bundle: &ModelBundle,
    batch: &[(TokenSequence, [f64; Label::COUNT])],
    h: f64,
    samples_per_tensor: usize,
    scale: f64,
) -> Result<GradCheckReport, TrainError> {
    let tamper = move |grads: &mut Classifier| {
        for (data, _) in grads
            .encoder
            .tensors_mut()
            .into_iter()
            .chain(grads.head.tensors_mut())
        {
            for x in data {
                *x *= scale;
            }
        }
    };
    grad_check_inner(bundle, batch, h, samples_per_tensor, Some(&tamper))
}

fn grad_check_inner(
    bundle: &ModelBundle,
    batch: &[(TokenSequence, [f64; Label::COUNT])],
    h: f64,
    samples_per_tensor: usize,
    tamper: Option<&dyn Fn(&mut Classifier)>,
) -> Result<GradCheckReport, TrainError> {
    assert!(h > 0.0, "step size must be positive");
    assert!(!batch.is_empty(), "gradient check needs at least one document");
    let seqs: Vec<&TokenSequence> = batch.iter().map(|(seq, _)| seq).collect();
    match bundle {
        ModelBundle::MultiLabel { classifier } => {
            let mut targets = Array2::zeros((batch.len(), Label::COUNT));
            for (bi, (_, ys)) in batch.iter().enumerate() {
                for (o, &y) in ys.iter().enumerate() {
                    targets[[bi, o]] = y;
                }
            }
            check_classifier(classifier, &seqs, &targets, h, samples_per_tensor, tamper)
        }
        ModelBundle::BinaryRelevance { classifiers } => {
            let mut worst = GradCheckReport {
                max_rel_error: 0.0,
                coordinates_checked: 0,
            };
            for (li, classifier) in classifiers.iter().enumerate() {
                let mut targets = Array2::zeros((batch.len(), 1));
                for (bi, (_, ys)) in batch.iter().enumerate() {
                    targets[[bi, 0]] = ys[li];
                }
                let report =
                    check_classifier(classifier, &seqs, &targets, h, samples_per_tensor, tamper)?;
                worst.max_rel_error = worst.max_rel_error.max(report.max_rel_error);
                worst.coordinates_checked += report.coordinates_checked;
            }
            Ok(worst)
        }
    }
}

/// Core check for one classifier. `tamper` mutates the analytic gradients
/// before comparison so tests can confirm the check actually detects errors.
fn check_classifier(
    classifier: &Classifier,
    seqs: &[&TokenSequence],
    targets: &Array2<f64>,
    h: f64,
    samples_per_tensor: usize,
    tamper: Option<&dyn Fn(&mut Classifier)>,
) -> Result<GradCheckReport, TrainError> {
    let (logits, pooled, caches) = forward_logits(classifier, seqs)?;
    let (_, d_logits) = bce_loss(&logits, targets);
    let mut grads = zero_grads(classifier);
    backward_logits(classifier, &pooled, &caches, &d_logits, &mut grads);
    if let Some(f) = tamper {
        f(&mut grads);
    }

    let analytic: Vec<Vec<f64>> = grads
        .encoder
        .tensors()
        .into_iter()
        .chain(grads.head.tensors())
        .map(|(data, _)| data.to_vec())
        .collect();

    let mut work = classifier.clone();
    let mut max_rel: f64 = 0.0;
    let mut checked = 0usize;
    for (ti, tensor) in analytic.iter().enumerate() {
        for ci in top_coords(tensor, samples_per_tensor) {
            let origin = with_coord(&mut work, ti, ci, |x| *x);
            with_coord(&mut work, ti, ci, |x| *x = origin + h);
            let loss_plus = batch_loss(&work, seqs, targets)?;
            with_coord(&mut work, ti, ci, |x| *x = origin - h);
            let loss_minus = batch_loss(&work, seqs, targets)?;
            with_coord(&mut work, ti, ci, |x| *x = origin);

            let numeric = (loss_plus - loss_minus) / (2.0 * h);
            let g = tensor[ci];
            let rel = (g - numeric).abs() / g.abs().max(numeric.abs()).max(1e-8);
            max_rel = max_rel.max(rel);
            checked += 1;
        }
    }
    Ok(GradCheckReport {
        max_rel_error: max_rel,
        coordinates_checked: checked,
    })
}

/// Smallest analytic gradient magnitude worth comparing against a central
/// difference. A couple of ulps of loss noise across 2h = 2e-5 is about
/// 1e-11; against this floor that is a relative error under 1e-6.
pub const NOISE_FLOOR: f64 = 2e-5;

/// Indices of the `k` largest-magnitude entries at or above the noise floor,
/// in index order.
fn top_coords(tensor: &[f64], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..tensor.len())
        .filter(|&i| tensor[i].abs() >= NOISE_FLOOR)
        .collect();
    if idx.len() > k {
        idx.sort_by(|&a, &b| {
            tensor[b]
                .abs()
                .partial_cmp(&tensor[a].abs())
                .unwrap()
                .then(a.cmp(&b))
        });
        idx.truncate(k);
        idx.sort_unstable();
    }
    idx
}

fn with_coord<R>(c: &mut Classifier, ti: usize, ci: usize, f: impl FnOnce(&mut f64) -> R) -> R {
    let mut tensors = c.encoder.tensors_mut();
    tensors.extend(c.head.tensors_mut());
    f(&mut tensors[ti].0[ci])
}

fn batch_loss(
    classifier: &Classifier,
    seqs: &[&TokenSequence],
    targets: &Array2<f64>,
) -> Result<f64, ModelError> {
    let (logits, _, _) = forward_logits(classifier, seqs)?;
    Ok(bce_loss(&logits, targets).0)
}
