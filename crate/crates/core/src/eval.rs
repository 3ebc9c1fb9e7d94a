//! Classification quality metrics and the latency benchmark.
//!
//! Certainty is the mean probability a model assigns to the true label;
//! accuracy is the fraction of argmax-correct predictions. Both are reported
//! per class and pooled over all records, as percentages.

use std::fmt::Write as _;

use thiserror::Error;

use crate::data::{build_tensors, DataError, LabeledDataset, Representation, TensorSet};
use crate::nn::{argmax, AnyModel, Network, NnError};
use crate::scalar::Scalar;

/// Errors raised while computing metrics or benchmarks.
#[derive(Debug, Error)]
pub enum EvalError {
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("model takes {model} inputs but the representation yields {data}")]
    RepresentationMismatch {
        model: &'static str,
        data: &'static str,
    },
    #[error("model labels {model:?} do not match dataset labels {data:?}")]
    LabelMismatch {
        model: Vec<String>,
        data: Vec<String>,
    },
    #[error("latency benchmark needs at least 2 samples, got {0}")]
    InsufficientSamples(usize),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Data(#[from] DataError),
}

/// Metrics for one class, or for the pooled total.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassMetrics {
    pub label: String,
    pub images_tested: usize,
    pub certainty_pct: f64,
    pub accuracy_pct: f64,
}

/// Per-class rows plus the pooled `total` row.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub classes: Vec<ClassMetrics>,
    pub total: ClassMetrics,
}

impl MetricsReport {
    fn rows(&self) -> impl Iterator<Item = &ClassMetrics> {
        self.classes.iter().chain(std::iter::once(&self.total))
    }

    /// Aligned UTF-8 table with percentages to two decimal places.
    pub fn table(&self) -> String {
        let width = self
            .rows()
            .map(|r| r.label.len())
            .max()
            .unwrap_or(0)
            .max("class".len());
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<width$}  {:>6}  {:>10}  {:>9}",
            "class", "images", "certainty%", "accuracy%"
        );
        for row in self.rows() {
            let _ = writeln!(
                out,
                "{:<width$}  {:>6}  {:>10.2}  {:>9.2}",
                row.label, row.images_tested, row.certainty_pct, row.accuracy_pct
            );
        }
        out
    }

    /// CSV with header `class,images_tested,certainty_pct,accuracy_pct`;
    /// the pooled row is labeled `total` and comes last.
    pub fn csv(&self) -> String {
        let mut out = String::from("class,images_tested,certainty_pct,accuracy_pct\n");
        for row in self.rows() {
            let _ = writeln!(
                out,
                "{},{},{:.2},{:.2}",
                row.label, row.images_tested, row.certainty_pct, row.accuracy_pct
            );
        }
        out
    }
}

/// Latency summary in milliseconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatencyStats {
    pub samples: usize,
    pub mean_ms: f64,
    pub stddev_ms: f64,
}

impl std::fmt::Display for LatencyStats {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "n={} mean={:.4} ms stddev={:.4} ms",
            self.samples, self.mean_ms, self.stddev_ms
        )
    }
}

/// Folds per-record predictions into the report.
///
/// Each prediction is the probability vector (aligned with `class_labels`)
/// plus the true class index. Certainty sums `probs[true_class]`, accuracy
/// counts `argmax(probs) == true_class` with ties resolving to index 0, both
/// accumulated in record order. Classes absent from `predictions` report 0%.
pub fn metrics_from_predictions(
    predictions: &[(Vec<f64>, usize)],
    class_labels: &[String],
) -> Result<MetricsReport, EvalError> {
    if predictions.is_empty() {
        return Err(EvalError::EmptyDataset);
    }
    let n_classes = class_labels.len();
    let mut tested = vec![0usize; n_classes];
    let mut prob_sums = vec![0f64; n_classes];
    let mut correct = vec![0usize; n_classes];
    let mut total_prob_sum = 0f64;
    for (probs, true_class) in predictions {
        if probs.len() != n_classes {
            return Err(NnError::DimensionMismatch {
                expected: n_classes,
                got: probs.len(),
            }
            .into());
        }
        if *true_class >= n_classes {
            return Err(NnError::IndexOutOfRange {
                index: *true_class,
                len: n_classes,
            }
            .into());
        }
        let p = probs[*true_class];
        tested[*true_class] += 1;
        prob_sums[*true_class] += p;
        total_prob_sum += p;
        if argmax(probs) == *true_class {
            correct[*true_class] += 1;
        }
    }
    let as_row = |label: &str, tested: usize, prob_sum: f64, correct: usize| ClassMetrics {
        label: label.to_string(),
        images_tested: tested,
        certainty_pct: if tested == 0 {
            0.0
        } else {
            100.0 * prob_sum / tested as f64
        },
        accuracy_pct: if tested == 0 {
            0.0
        } else {
            100.0 * correct as f64 / tested as f64
        },
    };
    let classes = class_labels
        .iter()
        .enumerate()
        .map(|(c, label)| as_row(label, tested[c], prob_sums[c], correct[c]))
        .collect();
    let total = as_row(
        "total",
        predictions.len(),
        total_prob_sum,
        correct.iter().sum(),
    );
    Ok(MetricsReport { classes, total })
}

/// Runs infer-mode forward passes over `val` and folds them into a report.
///
/// The representation must match the model family (vectors for a dense
/// network, grids for a convolutional one) and the model's label order must
/// equal the dataset's ascending vocabulary.
pub fn evaluate<T: Scalar>(
    model: &AnyModel<T>,
    val: &LabeledDataset<T>,
    representation: Representation,
) -> Result<MetricsReport, EvalError> {
    if val.is_empty() {
        return Err(EvalError::EmptyDataset);
    }
    if model.class_labels() != val.class_labels() {
        return Err(EvalError::LabelMismatch {
            model: model.class_labels().to_vec(),
            data: val.class_labels().to_vec(),
        });
    }
    let tensors = build_tensors(val, representation)?;
    let mut predictions = Vec::with_capacity(tensors.len());
    match (model, &tensors) {
        (AnyModel::Mlp(m), TensorSet::Vectors(items)) => {
            for (x, class) in items {
                let probs = m.forward_infer(x)?;
                predictions.push((probs.iter().map(|&p| p.to_f64()).collect(), *class));
            }
        }
        (AnyModel::Cnn(m), TensorSet::Grids(items)) => {
            for (grid, class) in items {
                let probs = m.forward_infer(grid)?;
                predictions.push((probs.iter().map(|&p| p.to_f64()).collect(), *class));
            }
        }
        (AnyModel::Mlp(_), TensorSet::Grids(_)) => {
            return Err(EvalError::RepresentationMismatch {
                model: "feature-vector",
                data: "grid",
            })
        }
        (AnyModel::Cnn(_), TensorSet::Vectors(_)) => {
            return Err(EvalError::RepresentationMismatch {
                model: "grid",
                data: "feature-vector",
            })
        }
    }
    metrics_from_predictions(&predictions, val.class_labels())
}

/// Mean and sample (n−1) standard deviation of latency samples, in ms.
pub fn bench_latency(samples_ms: &[f64]) -> Result<LatencyStats, EvalError> {
    if samples_ms.len() < 2 {
        return Err(EvalError::InsufficientSamples(samples_ms.len()));
    }
    let n = samples_ms.len() as f64;
    let mean = samples_ms.iter().sum::<f64>() / n;
    let var = samples_ms.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok(LatencyStats {
        samples: samples_ms.len(),
        mean_ms: mean,
        stddev_ms: var.sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{synth_generate, SynthConfig};
    use crate::nn::{Activation, DenseLayer, MlpModel};

    fn labels(names: &[&str]) -> Vec<String> {
        names.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn always_first_class_fixture_matches_hand_counts() {
        // Three happiness records and one neutral, model pinned to [1, 0].
        let preds: Vec<(Vec<f64>, usize)> = vec![
            (vec![1.0, 0.0], 0),
            (vec![1.0, 0.0], 0),
            (vec![1.0, 0.0], 0),
            (vec![1.0, 0.0], 1),
        ];
        let report =
            metrics_from_predictions(&preds, &labels(&["happiness", "neutral"])).unwrap();
        assert_eq!(report.classes[0].images_tested, 3);
        assert_eq!(report.classes[0].accuracy_pct, 100.0);
        assert_eq!(report.classes[0].certainty_pct, 100.0);
        assert_eq!(report.classes[1].images_tested, 1);
        assert_eq!(report.classes[1].accuracy_pct, 0.0);
        assert_eq!(report.classes[1].certainty_pct, 0.0);
        assert_eq!(report.total.images_tested, 4);
        assert_eq!(report.total.accuracy_pct, 75.0);
        assert_eq!(report.total.certainty_pct, 75.0);
    }

    #[test]
    fn uniform_model_scores_certainty_half_and_ties_go_to_class_zero() {
        let preds: Vec<(Vec<f64>, usize)> = vec![
            (vec![0.5, 0.5], 0),
            (vec![0.5, 0.5], 0),
            (vec![0.5, 0.5], 1),
            (vec![0.5, 0.5], 1),
            (vec![0.5, 0.5], 1),
        ];
        let report =
            metrics_from_predictions(&preds, &labels(&["happiness", "neutral"])).unwrap();
        for row in report.classes.iter().chain([&report.total]) {
            assert_eq!(row.certainty_pct, 50.0, "{}", row.label);
        }
        assert_eq!(report.classes[0].accuracy_pct, 100.0);
        assert_eq!(report.classes[1].accuracy_pct, 0.0);
        assert_eq!(report.total.accuracy_pct, 100.0 * 2.0 / 5.0);
    }

    #[test]
    fn matches_brute_force_oracle_on_randomized_fixtures() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2024);
        let names = labels(&["happiness", "neutral"]);
        for _ in 0..20 {
            let n = rng.random_range(1..=64);
            let preds: Vec<(Vec<f64>, usize)> = (0..n)
                .map(|_| {
                    let p: f64 = rng.random_range(0.0..1.0);
                    (vec![p, 1.0 - p], rng.random_range(0..2))
                })
                .collect();
            let report = metrics_from_predictions(&preds, &names).unwrap();

            // Oracle: independent per-class loops with direct counting.
            for (c, row) in report.classes.iter().enumerate() {
                let mut count = 0usize;
                let mut prob_sum = 0f64;
                let mut correct = 0usize;
                for (probs, true_class) in &preds {
                    if *true_class != c {
                        continue;
                    }
                    count += 1;
                    prob_sum += probs[c];
                    let pred = if probs[1] > probs[0] { 1 } else { 0 };
                    if pred == c {
                        correct += 1;
                    }
                }
                assert_eq!(row.images_tested, count);
                if count > 0 {
                    assert_eq!(row.certainty_pct, 100.0 * prob_sum / count as f64);
                    assert_eq!(row.accuracy_pct, 100.0 * correct as f64 / count as f64);
                } else {
                    assert_eq!(row.certainty_pct, 0.0);
                    assert_eq!(row.accuracy_pct, 0.0);
                }
            }
            let mut total_prob = 0f64;
            let mut total_correct = 0usize;
            for (probs, true_class) in &preds {
                total_prob += probs[*true_class];
                let pred = if probs[1] > probs[0] { 1 } else { 0 };
                if pred == *true_class {
                    total_correct += 1;
                }
            }
            assert_eq!(report.total.images_tested, n);
            assert_eq!(report.total.certainty_pct, 100.0 * total_prob / n as f64);
            assert_eq!(
                report.total.accuracy_pct,
                100.0 * total_correct as f64 / n as f64
            );
        }
    }

    #[test]
    fn record_order_permutation_leaves_the_report_unchanged() {
        // Dyadic probabilities make the sums exact under reordering.
        let mut preds: Vec<(Vec<f64>, usize)> = vec![
            (vec![0.75, 0.25], 0),
            (vec![0.25, 0.75], 1),
            (vec![0.5, 0.5], 0),
            (vec![0.125, 0.875], 0),
            (vec![0.875, 0.125], 1),
        ];
        let names = labels(&["happiness", "neutral"]);
        let before = metrics_from_predictions(&preds, &names).unwrap();
        preds.reverse();
        let after = metrics_from_predictions(&preds, &names).unwrap();
        assert_eq!(before, after);
    }

    #[test]
    fn pooled_correct_count_is_the_sum_of_class_correct_counts() {
        let preds: Vec<(Vec<f64>, usize)> = vec![
            (vec![0.9, 0.1], 0),
            (vec![0.2, 0.8], 0),
            (vec![0.3, 0.7], 1),
            (vec![0.6, 0.4], 1),
            (vec![0.1, 0.9], 1),
        ];
        let names = labels(&["happiness", "neutral"]);
        let report = metrics_from_predictions(&preds, &names).unwrap();
        let class_correct: f64 = report
            .classes
            .iter()
            .map(|r| r.accuracy_pct * r.images_tested as f64 / 100.0)
            .sum();
        let total_correct = report.total.accuracy_pct * report.total.images_tested as f64 / 100.0;
        assert!((class_correct - total_correct).abs() < 1e-9);
        assert_eq!(
            report.total.images_tested,
            report.classes.iter().map(|r| r.images_tested).sum::<usize>()
        );
    }

    #[test]
    fn empty_predictions_are_rejected() {
        let err = metrics_from_predictions(&[], &labels(&["happiness", "neutral"])).unwrap_err();
        assert!(matches!(err, EvalError::EmptyDataset));
    }

    fn zero_mlp(input_dim: usize) -> MlpModel<f32> {
        MlpModel::from_parts(
            vec![DenseLayer::zeros(input_dim, 2, Activation::Softmax)],
            Vec::new(),
            labels(&["happiness", "neutral"]),
        )
        .unwrap()
    }

    #[test]
    fn zero_weight_model_evaluates_to_uniform_certainty() {
        let ds = synth_generate::<f32>(&SynthConfig {
            per_class: 2,
            seed: 1,
            jitter_sigma: 1.0,
        });
        let model = AnyModel::Mlp(zero_mlp(114));
        let report = evaluate(&model, &ds, Representation::Modified).unwrap();
        for row in report.classes.iter().chain([&report.total]) {
            assert_eq!(row.certainty_pct, 50.0, "{}", row.label);
        }
        // All-zero logits tie; ties resolve to class 0 (happiness).
        assert_eq!(report.classes[0].accuracy_pct, 100.0);
        assert_eq!(report.classes[1].accuracy_pct, 0.0);
        assert_eq!(report.total.accuracy_pct, 50.0);
        assert_eq!(report.total.images_tested, 4);
    }

    #[test]
    fn representation_and_label_mismatches_are_rejected() {
        let ds = synth_generate::<f32>(&SynthConfig {
            per_class: 1,
            seed: 1,
            jitter_sigma: 0.0,
        });
        let model = AnyModel::Mlp(zero_mlp(114));
        let err = evaluate(
            &model,
            &ds,
            Representation::Raster {
                grid_size: 32,
                augment_flip: false,
            },
        )
        .unwrap_err();
        assert!(matches!(err, EvalError::RepresentationMismatch { .. }));

        let other = AnyModel::Mlp(
            MlpModel::from_parts(
                vec![DenseLayer::zeros(114, 2, Activation::Softmax)],
                Vec::new(),
                labels(&["anger", "fear"]),
            )
            .unwrap(),
        );
        let err = evaluate(&other, &ds, Representation::Modified).unwrap_err();
        assert!(matches!(err, EvalError::LabelMismatch { .. }));
    }

    #[test]
    fn report_formats_table_and_csv_to_two_decimals() {
        let preds: Vec<(Vec<f64>, usize)> = vec![
            (vec![1.0, 0.0], 0),
            (vec![1.0, 0.0], 0),
            (vec![1.0, 0.0], 0),
            (vec![1.0, 0.0], 1),
        ];
        let report =
            metrics_from_predictions(&preds, &labels(&["happiness", "neutral"])).unwrap();
        let csv = report.csv();
        assert_eq!(
            csv,
            "class,images_tested,certainty_pct,accuracy_pct\n\
             happiness,3,100.00,100.00\n\
             neutral,1,0.00,0.00\n\
             total,4,75.00,75.00\n"
        );
        let table = report.table();
        assert!(table.contains("happiness"), "{table}");
        assert!(table.contains("75.00"), "{table}");
        assert!(table.lines().count() == 4, "{table}");
    }

    #[test]
    fn latency_of_two_samples_matches_hand_arithmetic() {
        let stats = bench_latency(&[10.0, 20.0]).unwrap();
        assert_eq!(stats.samples, 2);
        assert_eq!(stats.mean_ms, 15.0);
        assert!((stats.stddev_ms - 50f64.sqrt()).abs() < 1e-12);
        assert_eq!(format!("{:.4}", stats.stddev_ms), "7.0711");
    }

    #[test]
    fn constant_latency_trace_has_zero_spread() {
        let stats = bench_latency(&[10.0; 50]).unwrap();
        assert_eq!(stats.mean_ms, 10.0);
        assert_eq!(stats.stddev_ms, 0.0);
    }

    #[test]
    fn latency_requires_two_samples() {
        assert!(matches!(
            bench_latency(&[]),
            Err(EvalError::InsufficientSamples(0))
        ));
        assert!(matches!(
            bench_latency(&[5.0]),
            Err(EvalError::InsufficientSamples(1))
        ));
    }

    #[test]
    fn latency_matches_two_pass_oracle_on_a_spread_trace() {
        let samples: Vec<f64> = (0..25).map(|i| 5.0 + (i as f64) * 0.37).collect();
        let stats = bench_latency(&samples).unwrap();
        let mean = samples.iter().sum::<f64>() / 25.0;
        let var: f64 = samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / 24.0;
        assert!((stats.mean_ms - mean).abs() / mean < 1e-9);
        assert!((stats.stddev_ms - var.sqrt()).abs() / var.sqrt() < 1e-9);
    }
}
