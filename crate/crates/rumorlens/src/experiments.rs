//! Hyperparameter grid search and report rendering.
//!
//! A grid is the Cartesian product of candidate lists; every combination is
//! cross-validated with the same seed (hence the same fold plan) and the
//! results are ranked by the selected metric. Individual failures are
//! recorded, kept in the output, and excluded from the ranking instead of
//! aborting the run.

use std::path::Path;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{write_atomic, Dataset};
use crate::error::{Error, Result};
use crate::evaluation::{cross_validate, MetricsReport};
use crate::layers::Activation;
use crate::model::{ModelConfig, Variant};

/// Tunable training values searched by the grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    pub batch_size: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub conv_activation: Activation,
    pub dropout_rate: f64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            batch_size: 32,
            epochs: 5,
            learning_rate: 0.1,
            conv_activation: Activation::Relu,
            dropout_rate: 0.2,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size < 1 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if self.epochs < 1 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::Config("learning_rate must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::Config("dropout_rate must be in [0, 1)".into()));
        }
        Ok(())
    }

    /// Copies the hyperparameters that live on the model config.
    pub fn applied_to(&self, config: &ModelConfig) -> ModelConfig {
        let mut out = config.clone();
        out.dropout_rate = self.dropout_rate;
        out.conv_activation = self.conv_activation;
        out
    }
}

/// Candidate lists whose Cartesian product forms the grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridSpec {
    pub variants: Vec<Variant>,
    pub batch_sizes: Vec<usize>,
    pub epochs: Vec<usize>,
    pub learning_rates: Vec<f64>,
    pub conv_activations: Vec<Activation>,
    pub dropout_rates: Vec<f64>,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            variants: Variant::ALL.to_vec(),
            batch_sizes: vec![16, 32, 64],
            epochs: vec![5, 10, 20],
            learning_rates: vec![0.1, 0.01, 0.001],
            conv_activations: vec![Activation::Relu, Activation::Tanh],
            dropout_rates: vec![0.2],
        }
    }
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if self.variants.is_empty()
            || self.batch_sizes.is_empty()
            || self.epochs.is_empty()
            || self.learning_rates.is_empty()
            || self.conv_activations.is_empty()
            || self.dropout_rates.is_empty()
        {
            return Err(Error::Config("every grid dimension needs at least one candidate".into()));
        }
        for combo in self.combinations() {
            combo.1.validate()?;
        }
        Ok(())
    }

    /// All `(variant, hyperparams)` pairs in deterministic nesting order:
    /// variant, batch size, epochs, learning rate, activation, dropout.
    pub fn combinations(&self) -> Vec<(Variant, Hyperparams)> {
        let mut out = Vec::new();
        for &variant in &self.variants {
            for &batch_size in &self.batch_sizes {
                for &epochs in &self.epochs {
                    for &learning_rate in &self.learning_rates {
                        for &conv_activation in &self.conv_activations {
                            for &dropout_rate in &self.dropout_rates {
                                out.push((
                                    variant,
                                    Hyperparams {
                                        batch_size,
                                        epochs,
                                        learning_rate,
                                        conv_activation,
                                        dropout_rate,
                                    },
                                ));
                            }
                        }
                    }
                }
            }
        }
        out
    }
}

/// Outcome of one grid combination.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum RunStatus {
    Success { per_fold: Vec<MetricsReport>, mean: MetricsReport },
    Failed { error: String },
}

/// One cross-validated grid combination with its provenance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentResult {
    /// Position in the grid's combination order (stable across runs).
    pub combo_index: usize,
    pub variant: Variant,
    pub hyperparams: Hyperparams,
    #[serde(flatten)]
    pub status: RunStatus,
    pub wall_secs: f64,
    pub seed: u64,
    pub completed_at_unix: u64,
}

impl ExperimentResult {
    pub fn mean_metrics(&self) -> Option<&MetricsReport> {
        match &self.status {
            RunStatus::Success { mean, .. } => Some(mean),
            RunStatus::Failed { .. } => None,
        }
    }
}

/// Which mean metric orders the ranking.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionMetric {
    Accuracy,
    F1Pos,
}

impl SelectionMetric {
    pub fn parse(s: &str) -> Option<SelectionMetric> {
        match s {
            "accuracy" => Some(SelectionMetric::Accuracy),
            "f1_pos" | "f1" => Some(SelectionMetric::F1Pos),
            _ => None,
        }
    }

    fn of(&self, m: &MetricsReport) -> f64 {
        match self {
            SelectionMetric::Accuracy => m.accuracy.value,
            SelectionMetric::F1Pos => m.f1_pos.value,
        }
    }
}

/// Sorts successes by the selection metric (descending) with the tiebreak
/// chain fewer epochs, smaller batch, variant name, then smaller learning
/// rate, activation name, smaller dropout and finally combination index,
/// making the order total. Failures follow in combination order.
pub fn rank_results(results: &mut [ExperimentResult], selection: SelectionMetric) {
    results.sort_by(|a, b| {
        match (a.mean_metrics(), b.mean_metrics()) {
            (Some(ma), Some(mb)) => selection
                .of(mb)
                .total_cmp(&selection.of(ma))
                .then_with(|| a.hyperparams.epochs.cmp(&b.hyperparams.epochs))
                .then_with(|| a.hyperparams.batch_size.cmp(&b.hyperparams.batch_size))
                .then_with(|| a.variant.name().cmp(b.variant.name()))
                .then_with(|| {
                    a.hyperparams.learning_rate.total_cmp(&b.hyperparams.learning_rate)
                })
                .then_with(|| {
                    a.hyperparams
                        .conv_activation
                        .name()
                        .cmp(b.hyperparams.conv_activation.name())
                })
                .then_with(|| a.hyperparams.dropout_rate.total_cmp(&b.hyperparams.dropout_rate))
                .then_with(|| a.combo_index.cmp(&b.combo_index)),
            (Some(_), None) => std::cmp::Ordering::Less,
            (None, Some(_)) => std::cmp::Ordering::Greater,
            (None, None) => a.combo_index.cmp(&b.combo_index),
        }
    });
}

/// Cross-validates every grid combination (in parallel) and returns the
/// ranked results. All combinations share `seed`, so they see identical
/// fold plans and are directly comparable.
pub fn grid_search(
    grid: &GridSpec,
    base_config: &ModelConfig,
    dataset: &Dataset,
    k: usize,
    seed: u64,
    selection: SelectionMetric,
) -> Result<Vec<ExperimentResult>> {
    grid.validate()?;
    let combos = grid.combinations();

    let mut results: Vec<ExperimentResult> = combos
        .into_par_iter()
        .enumerate()
        .map(|(combo_index, (variant, hyperparams))| {
            let mut config = base_config.clone();
            config.variant = variant;
            let started = Instant::now();
            let status = match cross_validate(&config, &hyperparams, dataset, k, seed) {
                Ok(cv) => RunStatus::Success { per_fold: cv.per_fold, mean: cv.mean },
                Err(e) => RunStatus::Failed { error: e.to_string() },
            };
            ExperimentResult {
                combo_index,
                variant,
                hyperparams,
                status,
                wall_secs: started.elapsed().as_secs_f64(),
                seed,
                completed_at_unix: unix_now(),
            }
        })
        .collect();

    rank_results(&mut results, selection);
    Ok(results)
}

pub(crate) fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

const RESULTS_SCHEMA_VERSION: u64 = 1;

/// On-disk document for one experiment run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResultsDocument {
    pub schema_version: u64,
    pub seed: u64,
    pub k: usize,
    pub selection_metric: SelectionMetric,
    pub grid: GridSpec,
    /// Fully resolved run configuration, echoed for reproducibility.
    pub resolved_config: serde_json::Value,
    pub results: Vec<ExperimentResult>,
}

impl ResultsDocument {
    pub fn new(
        seed: u64,
        k: usize,
        selection_metric: SelectionMetric,
        grid: GridSpec,
        resolved_config: serde_json::Value,
        results: Vec<ExperimentResult>,
    ) -> Self {
        ResultsDocument {
            schema_version: RESULTS_SCHEMA_VERSION,
            seed,
            k,
            selection_metric,
            grid,
            resolved_config,
            results,
        }
    }
}

/// Writes the document atomically (temp file + rename).
pub fn save_results(doc: &ResultsDocument, path: &Path) -> Result<()> {
    let json = serde_json::to_string_pretty(doc).expect("results serialize");
    write_atomic(path, json.as_bytes())
}

pub fn load_results(path: &Path) -> Result<ResultsDocument> {
    let content = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let value: serde_json::Value = serde_json::from_str(&content)
        .map_err(|e| Error::CorruptModel(format!("results file is not valid JSON: {e}")))?;
    let version = value
        .get("schema_version")
        .and_then(|v| v.as_u64())
        .ok_or_else(|| Error::CorruptModel("results file missing schema_version".into()))?;
    if version != RESULTS_SCHEMA_VERSION {
        return Err(Error::UnsupportedVersion { found: version, supported: RESULTS_SCHEMA_VERSION });
    }
    serde_json::from_value(value)
        .map_err(|e| Error::CorruptModel(format!("results file schema mismatch: {e}")))
}

/// Output format of [`render_report`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Text,
    Csv,
}

impl ReportFormat {
    pub fn parse(s: &str) -> Option<ReportFormat> {
        match s {
            "text" => Some(ReportFormat::Text),
            "csv" => Some(ReportFormat::Csv),
            _ => None,
        }
    }
}

/// Renders one row per result with columns Technique, ACC, PRE, REC, F-M.
///
/// Metrics are percentages with exactly two decimals; ACC/PRE/REC/F-M map
/// to accuracy and the positive-class precision, recall and F-measure.
/// Text rows join fields with two spaces; CSV uses a lowercase header.
/// Failed combinations render `-` (text) or empty cells (csv). The output
/// depends only on the input, byte for byte.
pub fn render_report(results: &[ExperimentResult], format: ReportFormat) -> String {
    let mut out = String::new();
    match format {
        ReportFormat::Text => {
            out.push_str("Technique  ACC  PRE  REC  F-M\n");
            for r in results {
                match r.mean_metrics() {
                    Some(m) => out.push_str(&format!(
                        "{}  {:.2}  {:.2}  {:.2}  {:.2}\n",
                        r.variant.technique(),
                        m.accuracy.value,
                        m.precision_pos.value,
                        m.recall_pos.value,
                        m.f1_pos.value
                    )),
                    None => out.push_str(&format!("{}  -  -  -  -\n", r.variant.technique())),
                }
            }
        }
        ReportFormat::Csv => {
            out.push_str("technique,acc,pre,rec,f_m\n");
            for r in results {
                match r.mean_metrics() {
                    Some(m) => out.push_str(&format!(
                        "{},{:.2},{:.2},{:.2},{:.2}\n",
                        r.variant.technique(),
                        m.accuracy.value,
                        m.precision_pos.value,
                        m.recall_pos.value,
                        m.f1_pos.value
                    )),
                    None => out.push_str(&format!("{},,,,\n", r.variant.technique())),
                }
            }
        }
    }
    out
}
