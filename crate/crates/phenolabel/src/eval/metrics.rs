//! Confusion counting and the derived per-label and micro-averaged scores.

use serde::{Deserialize, Serialize};

use crate::label::{Label, LabelSet};

/// One label's confusion counts. Always satisfies
/// `true_pos + false_pos + false_neg + true_neg == documents scored`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub true_pos: u64,
    pub false_pos: u64,
    pub false_neg: u64,
    pub true_neg: u64,
}

impl Counts {
    pub fn total(&self) -> u64 {
        self.true_pos + self.false_pos + self.false_neg + self.true_neg
    }
}

/// Confusion counts for all four labels, indexed by `Label::index`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub per_label: [Counts; Label::COUNT],
}

impl ConfusionCounts {
    /// Tallies predictions against gold sets. Slices must be parallel:
    /// entry `i` of both describes the same document.
    pub fn tally(gold: &[LabelSet], predicted: &[LabelSet]) -> Self {
        assert_eq!(
            gold.len(),
            predicted.len(),
            "gold and predicted slices must be parallel"
        );
        let mut counts = Self::default();
        for (g, p) in gold.iter().zip(predicted) {
            for label in Label::ALL {
                let c = &mut counts.per_label[label.index()];
                match (g.contains(label), p.contains(label)) {
                    (true, true) => c.true_pos += 1,
                    (false, true) => c.false_pos += 1,
                    (true, false) => c.false_neg += 1,
                    (false, false) => c.true_neg += 1,
                }
            }
        }
        counts
    }

    pub fn label(&self, label: Label) -> &Counts {
        &self.per_label[label.index()]
    }
}

/// Precision, recall, F1, and accuracy for one label.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabelMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub accuracy: f64,
}

/// Scores pooled over all labels' counts, plus the two whole-set accuracies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MicroMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Fraction of correct label decisions over all documents times labels.
    pub overall_accuracy: f64,
    /// Fraction of documents whose full predicted set matches gold exactly.
    pub subset_accuracy: f64,
}

/// `num / den`, with an empty denominator scoring zero rather than NaN.
fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn f1_of(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

impl LabelMetrics {
    pub fn from_counts(counts: &Counts) -> LabelMetrics {
        let precision = ratio(counts.true_pos, counts.true_pos + counts.false_pos);
        let recall = ratio(counts.true_pos, counts.true_pos + counts.false_neg);
        LabelMetrics {
            precision,
            recall,
            f1: f1_of(precision, recall),
            accuracy: ratio(counts.true_pos + counts.true_neg, counts.total()),
        }
    }
}

/// Scores one label over parallel gold and predicted sets. Misaligned
/// slices are a caller bug and panic.
pub fn label_metrics(gold: &[LabelSet], predicted: &[LabelSet], label: Label) -> LabelMetrics {
    let counts = ConfusionCounts::tally(gold, predicted);
    LabelMetrics::from_counts(counts.label(label))
}

/// Micro averaging sums the four labels' counts before forming any ratio,
/// so frequent labels weigh proportionally more than rare ones.
pub fn micro_metrics(gold: &[LabelSet], predicted: &[LabelSet]) -> MicroMetrics {
    let counts = ConfusionCounts::tally(gold, predicted);
    let mut tp = 0;
    let mut fp = 0;
    let mut f_neg = 0;
    let mut tn = 0;
    for c in &counts.per_label {
        tp += c.true_pos;
        fp += c.false_pos;
        f_neg += c.false_neg;
        tn += c.true_neg;
    }
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + f_neg);
    let exact = gold.iter().zip(predicted).filter(|(g, p)| g == p).count() as u64;
    MicroMetrics {
        precision,
        recall,
        f1: f1_of(precision, recall),
        overall_accuracy: ratio(tp + tn, tp + fp + f_neg + tn),
        subset_accuracy: ratio(exact, gold.len() as u64),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{generate_synthetic, SyntheticSpec};

    fn set(labels: &[Label]) -> LabelSet {
        LabelSet::from_labels(labels)
    }

    #[test]
    fn counts_always_cover_every_document() {
        let gold = vec![set(&[Label::SI]), set(&[]), set(&[Label::SA, Label::ES])];
        let pred = vec![set(&[]), set(&[Label::SI]), set(&[Label::SA])];
        let counts = ConfusionCounts::tally(&gold, &pred);
        for label in Label::ALL {
            assert_eq!(counts.label(label).total(), 3);
        }
        assert_eq!(counts.label(Label::SI).false_neg, 1);
        assert_eq!(counts.label(Label::SI).false_pos, 1);
        assert_eq!(counts.label(Label::SA).true_pos, 1);
        assert_eq!(counts.label(Label::ES).false_neg, 1);
        assert_eq!(counts.label(Label::NSSI).true_neg, 3);
    }

    /// One true positive, one miss, no false alarms over three documents:
    /// precision 1, recall 1/2, F1 2/3, accuracy 2/3.
    #[test]
    fn single_label_scores_match_hand_counts() {
        let gold = vec![set(&[Label::SI]), set(&[Label::SI]), set(&[])];
        let pred = vec![set(&[Label::SI]), set(&[]), set(&[])];
        let m = label_metrics(&gold, &pred, Label::SI);
        assert_eq!(m.precision, 1.0);
        assert_eq!(m.recall, 0.5);
        assert!((m.f1 - 2.0 / 3.0).abs() < 1e-15);
        assert!((m.accuracy - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn degenerate_denominators_score_zero() {
        let gold = vec![set(&[]), set(&[])];
        let pred = vec![set(&[]), set(&[])];
        let m = label_metrics(&gold, &pred, Label::SI);
        assert_eq!(m.precision, 0.0);
        assert_eq!(m.recall, 0.0);
        assert_eq!(m.f1, 0.0);
        assert_eq!(m.accuracy, 1.0);

        let gold = vec![set(&[Label::SA]), set(&[])];
        let pred = vec![set(&[]), set(&[])];
        let m = label_metrics(&gold, &pred, Label::SA);
        assert_eq!(m.precision, 0.0);
        assert_eq!(m.recall, 0.0);
        assert_eq!(m.f1, 0.0);
    }

    #[test]
    fn perfect_predictions_score_one_everywhere() {
        let gold = vec![
            set(&[Label::SI, Label::NSSI]),
            set(&[Label::SA, Label::ES]),
            set(&[]),
        ];
        let m = micro_metrics(&gold, &gold);
        assert_eq!(m.precision, 1.0);
        assert_eq!(m.recall, 1.0);
        assert_eq!(m.f1, 1.0);
        assert_eq!(m.overall_accuracy, 1.0);
        assert_eq!(m.subset_accuracy, 1.0);
        for label in Label::ALL {
            let lm = label_metrics(&gold, &gold, label);
            assert_eq!(lm.precision, 1.0);
            assert_eq!(lm.recall, 1.0);
            assert_eq!(lm.f1, 1.0);
            assert_eq!(lm.accuracy, 1.0);
        }
    }

    /// Pooled counts TP=2 FP=1 FN=1 give P = R = F1 = 2/3, and the twelve
    /// decisions (3 documents, 4 labels) land 10 correct.
    #[test]
    fn micro_scores_match_hand_counts() {
        let gold = vec![
            set(&[Label::SI, Label::SA]),
            set(&[Label::ES]),
            set(&[]),
        ];
        let pred = vec![
            set(&[Label::SI]),
            set(&[Label::ES, Label::NSSI]),
            set(&[]),
        ];
        let m = micro_metrics(&gold, &pred);
        assert!((m.precision - 2.0 / 3.0).abs() < 1e-15);
        assert!((m.recall - 2.0 / 3.0).abs() < 1e-15);
        assert!((m.f1 - 2.0 / 3.0).abs() < 1e-15);
        assert!((m.overall_accuracy - 10.0 / 12.0).abs() < 1e-15);
        assert!((m.subset_accuracy - 1.0 / 3.0).abs() < 1e-15);
    }

    /// Predicting the empty set everywhere scores the positive mass as
    /// misses; on the reference corpus that is 675 positives over 2000
    /// decisions, so overall accuracy is exactly 0.6625.
    #[test]
    fn all_empty_predictions_on_the_reference_corpus() {
        let corpus = generate_synthetic(&SyntheticSpec::reference()).unwrap();
        let gold: Vec<LabelSet> = corpus.iter().map(|d| d.gold).collect();
        let pred = vec![LabelSet::default(); gold.len()];
        let m = micro_metrics(&gold, &pred);
        assert_eq!(m.recall, 0.0);
        assert_eq!(m.precision, 0.0);
        assert_eq!(m.f1, 0.0);
        assert_eq!(m.overall_accuracy, 1.0 - 675.0 / 2000.0);
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(1000))]
        /// Micro precision, recall, and overall accuracy recomputed directly
        /// from set intersections must match the pooled-count path exactly.
        #[test]
        fn micro_scores_match_a_set_arithmetic_oracle(
            pairs in proptest::collection::vec((0u8..16, 0u8..16), 1..40),
        ) {
            let gold: Vec<LabelSet> = pairs.iter().map(|(g, _)| mask_set(*g)).collect();
            let pred: Vec<LabelSet> = pairs.iter().map(|(_, p)| mask_set(*p)).collect();
            let m = micro_metrics(&gold, &pred);

            let mut inter = 0u64;
            let mut gold_n = 0u64;
            let mut pred_n = 0u64;
            let mut agree = 0u64;
            for (g, p) in gold.iter().zip(&pred) {
                for label in Label::ALL {
                    let (gi, pi) = (g.contains(label), p.contains(label));
                    inter += (gi && pi) as u64;
                    gold_n += gi as u64;
                    pred_n += pi as u64;
                    agree += (gi == pi) as u64;
                }
            }
            let oracle_p = if pred_n == 0 { 0.0 } else { inter as f64 / pred_n as f64 };
            let oracle_r = if gold_n == 0 { 0.0 } else { inter as f64 / gold_n as f64 };
            proptest::prop_assert_eq!(m.precision, oracle_p);
            proptest::prop_assert_eq!(m.recall, oracle_r);
            proptest::prop_assert_eq!(
                m.overall_accuracy,
                agree as f64 / (4 * gold.len()) as f64
            );
        }

        /// F1 equals the harmonic mean identity 2TP / (2TP + FP + FN).
        #[test]
        fn micro_f1_matches_the_count_identity(
            pairs in proptest::collection::vec((0u8..16, 0u8..16), 1..40),
        ) {
            let gold: Vec<LabelSet> = pairs.iter().map(|(g, _)| mask_set(*g)).collect();
            let pred: Vec<LabelSet> = pairs.iter().map(|(_, p)| mask_set(*p)).collect();
            let m = micro_metrics(&gold, &pred);
            let counts = ConfusionCounts::tally(&gold, &pred);
            let (mut tp, mut fp, mut f_neg) = (0u64, 0u64, 0u64);
            for c in &counts.per_label {
                tp += c.true_pos;
                fp += c.false_pos;
                f_neg += c.false_neg;
            }
            let expect = if 2 * tp + fp + f_neg == 0 {
                0.0
            } else {
                2.0 * tp as f64 / (2 * tp + fp + f_neg) as f64
            };
            proptest::prop_assert!((m.f1 - expect).abs() < 1e-12);
        }
    }

    fn mask_set(mask: u8) -> LabelSet {
        let labels: Vec<Label> = Label::ALL
            .into_iter()
            .filter(|l| mask & (1 << l.index()) != 0)
            .collect();
        LabelSet::from_labels(&labels)
    }
}
