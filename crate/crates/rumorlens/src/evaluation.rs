//! Confusion-matrix metrics and stratified k-fold cross validation.
//!
//! The positive class is "rumor" (label 1). Reports carry both the
//! positive-class metrics (the primary view, matching the ACC/PRE/REC/F-M
//! table layout) and macro averages over the two classes. Ratios of the
//! form 0/0 are reported as 0 with an explicit `defined = false` marker so
//! a degenerate fold never aborts a longer run.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::experiments::Hyperparams;
use crate::model::{build_model, ModelConfig};
use crate::rng::SeededRng;
use crate::text::EncodedExample;

/// Joint outcome counts; positive class = rumor = label 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub tn: usize,
}

impl ConfusionMatrix {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.fn_ + self.tn
    }
}

/// A percentage in [0, 100] with an explicit undefined marker for 0/0
/// ratios (reported as 0).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metric {
    pub value: f64,
    pub defined: bool,
}

impl Metric {
    fn defined(value: f64) -> Metric {
        Metric { value, defined: true }
    }

    fn undefined() -> Metric {
        Metric { value: 0.0, defined: false }
    }

    /// Ratio as a percentage, undefined when the denominator is zero.
    fn ratio(num: usize, den: usize) -> Metric {
        if den == 0 {
            Metric::undefined()
        } else {
            Metric::defined(100.0 * num as f64 / den as f64)
        }
    }
}

/// Percent-scale metrics derived from one confusion matrix (or averaged
/// over folds).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub accuracy: Metric,
    pub precision_pos: Metric,
    pub recall_pos: Metric,
    pub f1_pos: Metric,
    pub precision_macro: Metric,
    pub recall_macro: Metric,
    pub f1_macro: Metric,
}

/// Tallies predictions against labels.
pub fn confusion(preds: &[u8], labels: &[u8]) -> Result<ConfusionMatrix> {
    if preds.len() != labels.len() {
        return Err(Error::Shape {
            op: "confusion",
            detail: format!("{} predictions vs {} labels", preds.len(), labels.len()),
        });
    }
    let mut cm = ConfusionMatrix { tp: 0, fp: 0, fn_: 0, tn: 0 };
    for (&p, &y) in preds.iter().zip(labels) {
        match (p, y) {
            (1, 1) => cm.tp += 1,
            (1, 0) => cm.fp += 1,
            (0, 1) => cm.fn_ += 1,
            (0, 0) => cm.tn += 1,
            _ => {
                return Err(Error::Shape {
                    op: "confusion",
                    detail: format!("labels must be binary, got prediction {p} / label {y}"),
                })
            }
        }
    }
    Ok(cm)
}

fn harmonic(p: Metric, r: Metric) -> Metric {
    if !p.defined || !r.defined || p.value + r.value == 0.0 {
        Metric::undefined()
    } else {
        Metric::defined(2.0 * p.value * r.value / (p.value + r.value))
    }
}

fn mean_metric(a: Metric, b: Metric) -> Metric {
    Metric { value: (a.value + b.value) / 2.0, defined: a.defined && b.defined }
}

/// Accuracy, per-class precision/recall/F1 for the positive class, and
/// macro averages over both classes, all as percentages.
pub fn compute_metrics(cm: &ConfusionMatrix) -> Result<MetricsReport> {
    if cm.total() == 0 {
        return Err(Error::EmptyEvaluation);
    }
    let accuracy = Metric::ratio(cm.tp + cm.tn, cm.total());
    let precision_pos = Metric::ratio(cm.tp, cm.tp + cm.fp);
    let recall_pos = Metric::ratio(cm.tp, cm.tp + cm.fn_);
    let f1_pos = harmonic(precision_pos, recall_pos);
    // negative class views the matrix mirrored
    let precision_neg = Metric::ratio(cm.tn, cm.tn + cm.fn_);
    let recall_neg = Metric::ratio(cm.tn, cm.tn + cm.fp);
    let f1_neg = harmonic(precision_neg, recall_neg);
    Ok(MetricsReport {
        accuracy,
        precision_pos,
        recall_pos,
        f1_pos,
        precision_macro: mean_metric(precision_pos, precision_neg),
        recall_macro: mean_metric(recall_pos, recall_neg),
        f1_macro: mean_metric(f1_pos, f1_neg),
    })
}

impl MetricsReport {
    /// Arithmetic mean over reports; each component is marked defined only
    /// when it was defined in every input.
    pub fn mean(reports: &[MetricsReport]) -> MetricsReport {
        assert!(!reports.is_empty(), "mean over zero reports");
        let n = reports.len() as f64;
        let avg = |pick: fn(&MetricsReport) -> Metric| {
            let sum: f64 = reports.iter().map(|r| pick(r).value).sum();
            Metric { value: sum / n, defined: reports.iter().all(|r| pick(r).defined) }
        };
        MetricsReport {
            accuracy: avg(|r| r.accuracy),
            precision_pos: avg(|r| r.precision_pos),
            recall_pos: avg(|r| r.recall_pos),
            f1_pos: avg(|r| r.f1_pos),
            precision_macro: avg(|r| r.precision_macro),
            recall_macro: avg(|r| r.recall_macro),
            f1_macro: avg(|r| r.f1_macro),
        }
    }
}

/// Assignment of every example to one of `k` folds, stratified by class.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    /// `fold_assignments[i]` = fold id of example `i`.
    pub fold_assignments: Vec<usize>,
    pub seed: u64,
}

impl FoldPlan {
    pub fn test_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.fold_assignments.len())
            .filter(|&i| self.fold_assignments[i] == fold)
            .collect()
    }

    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.fold_assignments.len())
            .filter(|&i| self.fold_assignments[i] != fold)
            .collect()
    }
}

/// Shuffles each class's indices by `seed`, then deals them round-robin
/// into `k` folds, so per-fold class counts differ from the ideal by at
/// most one.
pub fn stratified_kfold(labels: &[u8], k: usize, seed: u64) -> Result<FoldPlan> {
    assert!(k >= 2, "k must be at least 2");
    let mut rng = SeededRng::new(seed);
    let mut fold_assignments = vec![0usize; labels.len()];
    for class in [0u8, 1u8] {
        let mut members: Vec<usize> =
            (0..labels.len()).filter(|&i| labels[i] == class).collect();
        if members.len() < k {
            return Err(Error::InsufficientClass { label: class, count: members.len(), k });
        }
        rng.shuffle(&mut members);
        for (pos, idx) in members.into_iter().enumerate() {
            fold_assignments[idx] = pos % k;
        }
    }
    Ok(FoldPlan { k, fold_assignments, seed })
}

/// Thresholded predictions: probability >= 0.5 is the positive class.
pub fn threshold_predictions(probs: &[f64]) -> Vec<u8> {
    probs.iter().map(|&p| u8::from(p >= 0.5)).collect()
}

/// Eval-mode metrics of a model over a labeled slice.
pub fn evaluate_model(
    model: &crate::model::Model,
    examples: &[EncodedExample],
) -> Result<MetricsReport> {
    let probs = model.predict(examples)?;
    let preds = threshold_predictions(&probs);
    let labels: Vec<u8> = examples.iter().map(|e| e.label).collect();
    compute_metrics(&confusion(&preds, &labels)?)
}

/// Per-fold and mean metrics of a full stratified k-fold run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CrossValidation {
    pub per_fold: Vec<MetricsReport>,
    pub mean: MetricsReport,
}

/// Trains a fresh model per fold (seed `seed XOR fold_id`) on the other
/// `k - 1` folds and evaluates on the held-out fold. Folds run in parallel;
/// results are ordered by fold id, so the outcome does not depend on
/// scheduling.
pub fn cross_validate(
    config: &ModelConfig,
    hyper: &Hyperparams,
    dataset: &Dataset,
    k: usize,
    seed: u64,
) -> Result<CrossValidation> {
    let labels: Vec<u8> = dataset.examples.iter().map(|e| e.label).collect();
    let plan = stratified_kfold(&labels, k, seed)?;

    let per_fold: Vec<MetricsReport> = (0..k)
        .into_par_iter()
        .map(|fold| -> Result<MetricsReport> {
            let mut fold_config = hyper.applied_to(config);
            fold_config.seed = seed ^ fold as u64;
            let mut model = build_model(&fold_config)?;
            let train: Vec<EncodedExample> = plan
                .train_indices(fold)
                .into_iter()
                .map(|i| dataset.examples[i].clone())
                .collect();
            let test: Vec<EncodedExample> = plan
                .test_indices(fold)
                .into_iter()
                .map(|i| dataset.examples[i].clone())
                .collect();
            model
                .fit(&train, hyper.epochs, hyper.batch_size, hyper.learning_rate, None)
                .map_err(|e| match e {
                    Error::TrainingDiverged { epoch, batch, .. } => {
                        Error::TrainingDiverged { epoch, batch, fold: Some(fold) }
                    }
                    other => other,
                })?;
            evaluate_model(&model, &test)
        })
        .collect::<Result<Vec<_>>>()?;

    let mean = MetricsReport::mean(&per_fold);
    Ok(CrossValidation { per_fold, mean })
}
