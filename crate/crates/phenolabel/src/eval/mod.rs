//! Repeated stratified cross-validation: fold planning, per-run scoring,
//! and mean/std aggregation over all runs.
//!
//! The (repeat, fold) runs are mutually independent: each derives its own
//! training seed, so they run in parallel and aggregate deterministically
//! regardless of completion order.

pub mod metrics;
pub mod stratify;

use std::io;
use std::sync::Mutex;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::label::{Label, LabelSet};
use crate::model::{predict, threshold, EncoderConfig, ModelError, Strategy, DEFAULT_TAU};
use crate::seeding::derive_seed_tagged;
use crate::tokenizer::{tokenize, Vocabulary};
use crate::train::{train, TrainConfig, TrainError, TrainStats};

pub use metrics::{
    label_metrics, micro_metrics, ConfusionCounts, Counts, LabelMetrics, MicroMetrics,
};
pub use stratify::{stratified_kfold, FoldPlan};

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("invalid fold plan: {0}")]
    BadPlan(String),
    #[error("training failed in repeat {repeat}, fold {fold}: {source}")]
    Train {
        repeat: usize,
        fold: usize,
        #[source]
        source: TrainError,
    },
    #[error("inference failed in repeat {repeat}, fold {fold}: {source}")]
    Model {
        repeat: usize,
        fold: usize,
        #[source]
        source: ModelError,
    },
    #[error("repeat {repeat}, fold {fold} produced {got} predictions for {expected} documents")]
    PredictionCount {
        repeat: usize,
        fold: usize,
        got: usize,
        expected: usize,
    },
    #[error("metric table: {0}")]
    Table(#[from] csv::Error),
}

/// Mean and sample standard deviation (denominator n-1; zero when n < 2).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

pub fn mean_std(values: &[f64]) -> MeanStd {
    if values.is_empty() {
        return MeanStd { mean: 0.0, std: 0.0 };
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = if values.len() < 2 {
        0.0
    } else {
        let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
        (ss / (n - 1.0)).sqrt()
    };
    MeanStd { mean, std }
}

/// Scores for one (repeat, fold) run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub repeat: usize,
    pub fold: usize,
    pub per_label: [LabelMetrics; Label::COUNT],
    pub micro: MicroMetrics,
}

/// One label's scores aggregated over all runs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabelSummary {
    pub label: Label,
    pub precision: MeanStd,
    pub recall: MeanStd,
    pub f1: MeanStd,
    pub accuracy: MeanStd,
}

/// Aggregated cross-validation scores. Every per-run record is retained so
/// the summary statistics stay recomputable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub runs: Vec<RunMetrics>,
    pub per_label: [LabelSummary; Label::COUNT],
    pub micro_precision: MeanStd,
    pub micro_recall: MeanStd,
    pub micro_f1: MeanStd,
    pub overall_accuracy: MeanStd,
    pub subset_accuracy: MeanStd,
}

impl MetricsReport {
    pub fn from_runs(runs: Vec<RunMetrics>) -> MetricsReport {
        let collect = |f: &dyn Fn(&RunMetrics) -> f64| -> Vec<f64> {
            runs.iter().map(f).collect()
        };
        let per_label = Label::ALL.map(|label| {
            let li = label.index();
            LabelSummary {
                label,
                precision: mean_std(&collect(&|r| r.per_label[li].precision)),
                recall: mean_std(&collect(&|r| r.per_label[li].recall)),
                f1: mean_std(&collect(&|r| r.per_label[li].f1)),
                accuracy: mean_std(&collect(&|r| r.per_label[li].accuracy)),
            }
        });
        MetricsReport {
            per_label,
            micro_precision: mean_std(&collect(&|r| r.micro.precision)),
            micro_recall: mean_std(&collect(&|r| r.micro.recall)),
            micro_f1: mean_std(&collect(&|r| r.micro.f1)),
            overall_accuracy: mean_std(&collect(&|r| r.micro.overall_accuracy)),
            subset_accuracy: mean_std(&collect(&|r| r.micro.subset_accuracy)),
            runs,
        }
    }
}

/// Runs every (repeat, fold) split through `fit_predict` and aggregates the
/// scores. `fit_predict(train, test, repeat, fold)` must return one
/// predicted label set per test document, in test-corpus order. Runs execute
/// in parallel; on failure the first error in (repeat, fold) order is
/// returned.
pub fn cross_validate<F>(
    corpus: &Corpus,
    plan: &FoldPlan,
    fit_predict: F,
) -> Result<MetricsReport, EvalError>
where
    F: Fn(&Corpus, &Corpus, usize, usize) -> Result<Vec<LabelSet>, EvalError> + Sync,
{
    plan.validate(corpus)?;
    let pairs: Vec<(usize, usize)> = (0..plan.repeats)
        .flat_map(|r| (0..plan.folds).map(move |k| (r, k)))
        .collect();
    let results: Vec<Result<RunMetrics, EvalError>> = pairs
        .par_iter()
        .map(|&(repeat, fold)| {
            let (train_split, test_split) = plan.split(corpus, repeat, fold);
            let predicted = fit_predict(&train_split, &test_split, repeat, fold)?;
            if predicted.len() != test_split.len() {
                return Err(EvalError::PredictionCount {
                    repeat,
                    fold,
                    got: predicted.len(),
                    expected: test_split.len(),
                });
            }
            let gold: Vec<LabelSet> = test_split.iter().map(|d| d.gold).collect();
            let per_label = Label::ALL.map(|l| label_metrics(&gold, &predicted, l));
            let micro = micro_metrics(&gold, &predicted);
            Ok(RunMetrics {
                repeat,
                fold,
                per_label,
                micro,
            })
        })
        .collect();
    let mut runs = Vec::with_capacity(results.len());
    for result in results {
        runs.push(result?);
    }
    Ok(MetricsReport::from_runs(runs))
}

/// Training-side counters for one cross-validation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunTraining {
    pub repeat: usize,
    pub fold: usize,
    pub stats: TrainStats,
}

/// One strategy's full cross-validation result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyOutcome {
    pub strategy: Strategy,
    pub report: MetricsReport,
    pub training: Vec<RunTraining>,
}

/// Trains and scores each configured strategy over every fold of the plan.
///
/// Per run: the vocabulary is rebuilt from the training split only, the
/// encoder's vocab size follows it, the run trains under a seed derived
/// from (config seed, repeat, fold), and test documents are scored by
/// thresholding predicted probabilities at the default decision point.
pub fn run_cross_validation(
    corpus: &Corpus,
    vocab_builder: impl Fn(&Corpus) -> Vocabulary + Sync,
    encoder_config: &EncoderConfig,
    train_configs: &[TrainConfig],
    plan: &FoldPlan,
) -> Result<Vec<StrategyOutcome>, EvalError> {
    let mut outcomes = Vec::with_capacity(train_configs.len());
    for config in train_configs {
        let vessel: Mutex<Vec<RunTraining>> = Mutex::new(Vec::new());
        let report = cross_validate(corpus, plan, |train_split, test_split, repeat, fold| {
            let vocab = vocab_builder(train_split);
            let mut enc = encoder_config.clone();
            enc.vocab = vocab.size();
            let mut cfg = config.clone();
            cfg.seed = derive_seed_tagged(config.seed, "run", &[repeat as u64, fold as u64]);
            let outcome = train(train_split, &vocab, &enc, &cfg)
                .map_err(|source| EvalError::Train { repeat, fold, source })?;
            let mut predicted = Vec::with_capacity(test_split.len());
            for doc in test_split.iter() {
                let seq = tokenize(&doc.text, &vocab, enc.max_positions, false);
                let probs = predict(&outcome.bundle, &seq)
                    .map_err(|source| EvalError::Model { repeat, fold, source })?;
                predicted.push(threshold(&probs, DEFAULT_TAU));
            }
            vessel.lock().expect("stats vessel poisoned").push(RunTraining {
                repeat,
                fold,
                stats: outcome.stats,
            });
            Ok(predicted)
        })?;
        let mut training = vessel.into_inner().expect("stats vessel poisoned");
        training.sort_by_key(|t| (t.repeat, t.fold));
        outcomes.push(StrategyOutcome {
            strategy: config.strategy,
            report,
            training,
        });
    }
    Ok(outcomes)
}

/// Model-level table: one row per strategy, micro metrics and the two
/// accuracies as mean/std column pairs.
pub fn write_model_table<W: io::Write>(
    out: W,
    outcomes: &[(Strategy, &MetricsReport)],
) -> Result<(), EvalError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "strategy",
        "overall_accuracy_mean",
        "overall_accuracy_std",
        "micro_precision_mean",
        "micro_precision_std",
        "micro_recall_mean",
        "micro_recall_std",
        "micro_f1_mean",
        "micro_f1_std",
        "subset_accuracy_mean",
        "subset_accuracy_std",
    ])?;
    for (strategy, report) in outcomes {
        let mut row = vec![strategy.name().to_string()];
        for ms in [
            report.overall_accuracy,
            report.micro_precision,
            report.micro_recall,
            report.micro_f1,
            report.subset_accuracy,
        ] {
            row.push(format!("{:.6}", ms.mean));
            row.push(format!("{:.6}", ms.std));
        }
        w.write_record(&row)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Label-level table: one row per (strategy, label) with that label's
/// aggregated scores.
pub fn write_label_table<W: io::Write>(
    out: W,
    outcomes: &[(Strategy, &MetricsReport)],
) -> Result<(), EvalError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "strategy",
        "label",
        "accuracy_mean",
        "accuracy_std",
        "precision_mean",
        "precision_std",
        "recall_mean",
        "recall_std",
        "f1_mean",
        "f1_std",
    ])?;
    for (strategy, report) in outcomes {
        for summary in &report.per_label {
            let mut row = vec![strategy.name().to_string(), summary.label.name().to_string()];
            for ms in [summary.accuracy, summary.precision, summary.recall, summary.f1] {
                row.push(format!("{:.6}", ms.mean));
                row.push(format!("{:.6}", ms.std));
            }
            w.write_record(&row)?;
        }
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Document;
    use crate::model::Strategy;
    use crate::synth::{generate_synthetic, SyntheticSpec};
    use crate::tokenizer::build_vocab;

    fn reference_plan(corpus: &Corpus) -> FoldPlan {
        stratified_kfold(corpus, 5, 3, 404).unwrap()
    }

    #[test]
    fn oracle_predictions_score_one_with_zero_spread() {
        let corpus = generate_synthetic(&SyntheticSpec::reference()).unwrap();
        let plan = reference_plan(&corpus);
        let report = cross_validate(&corpus, &plan, |_, test, _, _| {
            Ok(test.iter().map(|d| d.gold).collect())
        })
        .unwrap();
        assert_eq!(report.runs.len(), 15);
        assert_eq!(report.micro_f1.mean, 1.0);
        assert_eq!(report.micro_f1.std, 0.0);
        assert_eq!(report.micro_precision.mean, 1.0);
        assert_eq!(report.micro_recall.mean, 1.0);
        assert_eq!(report.overall_accuracy.mean, 1.0);
        assert_eq!(report.subset_accuracy.mean, 1.0);
        for summary in &report.per_label {
            assert_eq!(summary.f1.mean, 1.0);
            assert_eq!(summary.f1.std, 0.0);
            assert_eq!(summary.accuracy.mean, 1.0);
        }
    }

    /// Never predicting anything keeps micro recall at zero while overall
    /// accuracy sits near the corpus negative rate in every fold.
    #[test]
    fn constant_empty_predictions_match_the_negative_rate() {
        let corpus = generate_synthetic(&SyntheticSpec::reference()).unwrap();
        let plan = reference_plan(&corpus);
        let report = cross_validate(&corpus, &plan, |_, test, _, _| {
            Ok(vec![LabelSet::EMPTY; test.len()])
        })
        .unwrap();
        assert_eq!(report.micro_recall.mean, 0.0);
        assert_eq!(report.micro_f1.mean, 0.0);
        assert!((report.overall_accuracy.mean - 0.6625).abs() < 0.02);
        assert!(report.overall_accuracy.std < 0.03);
    }

    #[test]
    fn failures_carry_their_run_coordinates() {
        let corpus = generate_synthetic(&SyntheticSpec::reference()).unwrap();
        let plan = reference_plan(&corpus);
        let err = cross_validate(&corpus, &plan, |_, test, repeat, fold| {
            if repeat == 1 && fold == 2 {
                Err(EvalError::Train {
                    repeat,
                    fold,
                    source: TrainError::EmptyCorpus,
                })
            } else {
                Ok(test.iter().map(|d| d.gold).collect())
            }
        })
        .unwrap_err();
        match err {
            EvalError::Train { repeat, fold, .. } => {
                assert_eq!((repeat, fold), (1, 2));
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn short_prediction_vectors_are_rejected() {
        let corpus = generate_synthetic(&SyntheticSpec::reference()).unwrap();
        let plan = reference_plan(&corpus);
        let err = cross_validate(&corpus, &plan, |_, _, _, _| Ok(Vec::new())).unwrap_err();
        assert!(matches!(err, EvalError::PredictionCount { .. }));
    }

    /// Mean and std published in the report must be recomputable from the
    /// retained per-run records.
    #[test]
    fn summaries_match_recomputation_from_retained_runs() {
        let corpus = generate_synthetic(&SyntheticSpec::reference()).unwrap();
        let plan = reference_plan(&corpus);
        // Imperfect but deterministic predictions: drop every third
        // document's labels and over-predict SI on the rest.
        let report = cross_validate(&corpus, &plan, |_, test, _, _| {
            Ok(test
                .iter()
                .enumerate()
                .map(|(i, d)| {
                    if i % 3 == 0 {
                        LabelSet::EMPTY
                    } else {
                        let mut s = d.gold;
                        s.insert(Label::SI);
                        s
                    }
                })
                .collect())
        })
        .unwrap();
        let f1s: Vec<f64> = report.runs.iter().map(|r| r.micro.f1).collect();
        let expect = mean_std(&f1s);
        assert_eq!(report.micro_f1, expect);
        let si = Label::SI.index();
        let recalls: Vec<f64> = report.runs.iter().map(|r| r.per_label[si].recall).collect();
        assert_eq!(report.per_label[si].recall, mean_std(&recalls));
        assert!(report.micro_f1.mean > 0.0 && report.micro_f1.mean < 1.0);
        assert!(report.micro_f1.std > 0.0);
    }

    #[test]
    fn mean_std_handles_tiny_samples() {
        assert_eq!(mean_std(&[]), MeanStd { mean: 0.0, std: 0.0 });
        assert_eq!(mean_std(&[0.7]), MeanStd { mean: 0.7, std: 0.0 });
        let ms = mean_std(&[1.0, 2.0, 3.0]);
        assert!((ms.mean - 2.0).abs() < 1e-15);
        assert!((ms.std - 1.0).abs() < 1e-15);
    }

    fn tiny_labeled_corpus() -> Corpus {
        let texts: [(&str, &[Label]); 9] = [
            ("patient denies suicidal ideation today", &[]),
            ("reports active suicidal ideation with plan", &[Label::SI]),
            ("suicide attempt last month by overdose", &[Label::SA]),
            ("chronic self-harm by cutting without intent", &[Label::NSSI]),
            ("ideation and a prior attempt noted", &[Label::SI, Label::SA]),
            ("exposure to a friend suicide last year", &[Label::ES]),
            ("no concerns raised at discharge", &[]),
            ("cutting behavior recurred this week", &[Label::NSSI]),
            ("passive death wish without plan", &[Label::SI]),
        ];
        let docs = texts
            .iter()
            .enumerate()
            .map(|(i, (text, labels))| Document {
                id: format!("d{i}"),
                text: text.to_string(),
                gold: LabelSet::from_labels(labels),
            })
            .collect();
        Corpus::new(docs).unwrap()
    }

    /// End-to-end determinism of the real training path on a small plan.
    #[test]
    fn trained_cross_validation_is_deterministic() {
        let corpus = tiny_labeled_corpus();
        let plan = stratified_kfold(&corpus, 3, 1, 9).unwrap();
        let enc = EncoderConfig {
            num_layers: 1,
            hidden: 16,
            heads: 2,
            ff: 32,
            max_positions: 16,
            vocab: 0,
            seed: 5,
        };
        let mut configs = vec![
            TrainConfig::defaults(Strategy::MultiLabel, 21),
            TrainConfig::defaults(Strategy::BinaryRelevance, 21),
        ];
        for c in &mut configs {
            c.epochs = 1;
        }
        let run = || {
            run_cross_validation(
                &corpus,
                |c| build_vocab(c, 1),
                &enc,
                &configs,
                &plan,
            )
            .unwrap()
        };
        let a = run();
        let b = run();
        assert_eq!(a, b);
        assert_eq!(a.len(), 2);
        assert_eq!(a[0].strategy, Strategy::MultiLabel);
        assert_eq!(a[1].strategy, Strategy::BinaryRelevance);
        for outcome in &a {
            assert_eq!(outcome.report.runs.len(), 3);
            assert_eq!(outcome.training.len(), 3);
            let coords: Vec<(usize, usize)> =
                outcome.training.iter().map(|t| (t.repeat, t.fold)).collect();
            assert_eq!(coords, vec![(0, 0), (0, 1), (0, 2)]);
        }
        // One epoch over a split of 6 training documents: the shared
        // encoder sees each once, the per-label variant four times each.
        let ml = &a[0].training[0].stats;
        let br = &a[1].training[0].stats;
        assert_eq!(br.encoder_forward_passes, 4 * ml.encoder_forward_passes);
    }

    #[test]
    fn model_table_lists_one_row_per_strategy() {
        let corpus = tiny_labeled_corpus();
        let plan = stratified_kfold(&corpus, 3, 2, 9).unwrap();
        let report = cross_validate(&corpus, &plan, |_, test, _, _| {
            Ok(test.iter().map(|d| d.gold).collect())
        })
        .unwrap();
        let mut model_csv = Vec::new();
        write_model_table(
            &mut model_csv,
            &[
                (Strategy::BinaryRelevance, &report),
                (Strategy::MultiLabel, &report),
            ],
        )
        .unwrap();
        let text = String::from_utf8(model_csv).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines[0].starts_with("strategy,overall_accuracy_mean"));
        assert!(lines[1].starts_with("binary_relevance,1.000000,0.000000"));
        assert!(lines[2].starts_with("multi_label,1.000000,0.000000"));

        let mut label_csv = Vec::new();
        write_label_table(&mut label_csv, &[(Strategy::MultiLabel, &report)]).unwrap();
        let text = String::from_utf8(label_csv).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 1 + Label::COUNT);
        assert!(lines[1].starts_with("multi_label,SI,"));
        assert!(lines[4].starts_with("multi_label,NSSI,"));
    }
}
