//! Binary cross-entropy over independent per-label logits.

use ndarray::Array2;

use crate::model::sigmoid;

/// Mean binary cross-entropy of a `[batch, labels]` logit matrix against
/// 0/1 targets, with the gradient w.r.t. the logits.
///
/// Computed in logit space: `max(z,0) − z·y + ln(1 + e^(−|z|))`, which never
/// overflows. The gradient is `(σ(z) − y) / N` with `N = batch · labels`.
pub fn bce_loss(logits: &Array2<f64>, targets: &Array2<f64>) -> (f64, Array2<f64>) {
    assert_eq!(logits.dim(), targets.dim(), "logits/targets shape mismatch");
    let n = logits.len() as f64;
    let mut sum = 0.0;
    let mut d = Array2::zeros(logits.raw_dim());
    for ((idx, &z), &y) in logits.indexed_iter().zip(targets.iter()) {
        debug_assert!(y == 0.0 || y == 1.0, "targets must be 0 or 1");
        sum += z.max(0.0) - z * y + (-z.abs()).exp().ln_1p();
        d[idx] = (sigmoid(z) - y) / n;
    }
    (sum / n, d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::arr2;

    #[test]
    fn chance_probability_gives_ln_two() {
        let (loss, grad) = bce_loss(&arr2(&[[0.0]]), &arr2(&[[1.0]]));
        assert!((loss - std::f64::consts::LN_2).abs() < 1e-12);
        assert!((grad[[0, 0]] - (0.5 - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn confident_correct_prediction_vanishes() {
        let (loss_pos, _) = bce_loss(&arr2(&[[40.0]]), &arr2(&[[1.0]]));
        let (loss_neg, _) = bce_loss(&arr2(&[[-40.0]]), &arr2(&[[0.0]]));
        assert!(loss_pos < 1e-15);
        assert!(loss_neg < 1e-15);
    }

    #[test]
    fn batch_loss_is_mean_of_item_losses() {
        let (l1, _) = bce_loss(&arr2(&[[1.3]]), &arr2(&[[1.0]]));
        let (l2, _) = bce_loss(&arr2(&[[-0.4]]), &arr2(&[[0.0]]));
        let (both, _) = bce_loss(&arr2(&[[1.3], [-0.4]]), &arr2(&[[1.0], [0.0]]));
        assert!((both - (l1 + l2) / 2.0).abs() < 1e-12);
    }

    #[test]
    fn extreme_logits_stay_finite() {
        let (loss, grad) = bce_loss(&arr2(&[[700.0, -700.0]]), &arr2(&[[0.0, 1.0]]));
        assert!(loss.is_finite());
        assert!(grad.iter().all(|g| g.is_finite()));
        // A hugely wrong logit costs about |z| / N.
        assert!((loss - 700.0).abs() < 1e-9);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let targets = arr2(&[[1.0, 0.0], [0.0, 1.0]]);
        let logits = arr2(&[[0.3, -1.2], [2.0, 0.7]]);
        let (_, grad) = bce_loss(&logits, &targets);
        let h = 1e-6;
        for i in 0..2 {
            for j in 0..2 {
                let mut plus = logits.clone();
                plus[[i, j]] += h;
                let mut minus = logits.clone();
                minus[[i, j]] -= h;
                let numeric = (bce_loss(&plus, &targets).0 - bce_loss(&minus, &targets).0) / (2.0 * h);
                assert!((numeric - grad[[i, j]]).abs() < 1e-9);
            }
        }
    }
}
