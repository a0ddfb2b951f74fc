//! Experiment protocols and their metric reports.
//!
//! Precision, recall and F-measure are undefined (`None`, rendered `n/a`)
//! when their denominator is zero; undefined values are skipped by every
//! average.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classifier::{forward, train_with_labels, Model, TrainConfig, TrainError};
use crate::dataset::{stratified_kfold, Dataset, DatasetError, Label};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error("training failed on fold {fold}: {source}")]
    FoldTraining { fold: usize, source: TrainError },
    #[error("training failed: {0}")]
    Training(#[from] TrainError),
    #[error("reports cover different labels: {0:?} vs {1:?}")]
    LabelMismatch(Vec<String>, Vec<String>),
    #[error("could not start worker pool: {0}")]
    Pool(String),
}

/// Rows are gold labels, columns predicted labels.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub labels: Vec<String>,
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn new(labels: Vec<String>) -> Self {
        let n = labels.len();
        Self {
            labels,
            counts: vec![vec![0; n]; n],
        }
    }

    pub fn from_pairs(labels: Vec<String>, pairs: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let mut cm = Self::new(labels);
        for (gold, predicted) in pairs {
            cm.record(gold, predicted);
        }
        cm
    }

    pub fn record(&mut self, gold: usize, predicted: usize) {
        self.counts[gold][predicted] += 1;
    }

    pub fn merge(&mut self, other: &ConfusionMatrix) {
        for (row, other_row) in self.counts.iter_mut().zip(&other.counts) {
            for (c, o) in row.iter_mut().zip(other_row) {
                *c += o;
            }
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn true_positives(&self, class: usize) -> u64 {
        self.counts[class][class]
    }

    pub fn false_positives(&self, class: usize) -> u64 {
        (0..self.labels.len())
            .filter(|&g| g != class)
            .map(|g| self.counts[g][class])
            .sum()
    }

    pub fn false_negatives(&self, class: usize) -> u64 {
        (0..self.labels.len())
            .filter(|&p| p != class)
            .map(|p| self.counts[class][p])
            .sum()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f_measure: Option<f64>,
}

impl ClassMetrics {
    pub fn from_precision_recall(precision: Option<f64>, recall: Option<f64>) -> Self {
        let f_measure = match (precision, recall) {
            (Some(p), Some(r)) if p + r > 0.0 => Some(2.0 * p * r / (p + r)),
            (Some(_), Some(_)) => Some(0.0),
            _ => None,
        };
        Self {
            precision,
            recall,
            f_measure,
        }
    }
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

pub fn metrics_from_confusion(cm: &ConfusionMatrix) -> BTreeMap<String, ClassMetrics> {
    cm.labels
        .iter()
        .enumerate()
        .map(|(c, label)| {
            let tp = cm.true_positives(c);
            let precision = ratio(tp, tp + cm.false_positives(c));
            let recall = ratio(tp, tp + cm.false_negatives(c));
            (label.clone(), ClassMetrics::from_precision_recall(precision, recall))
        })
        .collect()
}

/// Unweighted mean of the defined F-measures.
pub fn macro_f(per_class: &BTreeMap<String, ClassMetrics>) -> Option<f64> {
    mean(per_class.values().map(|m| m.f_measure))
}

fn mean(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let defined: Vec<f64> = values.flatten().collect();
    (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Protocol {
    Cv,
    Holdout,
}

/// How fold results combine into one report.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    /// One confusion matrix over all out-of-fold predictions.
    #[default]
    Pooled,
    /// Precision and recall averaged over folds; F recomputed from the means.
    PerFoldMean,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub protocol: Protocol,
    pub config_fingerprint: String,
    pub labels: Vec<String>,
    pub confusion: ConfusionMatrix,
    pub per_class: BTreeMap<String, ClassMetrics>,
    pub macro_f: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub folds: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fold_seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aggregation: Option<Aggregation>,
    /// Share of each label in the evaluated set.
    pub test_proportions: BTreeMap<String, f64>,
}

impl EvaluationReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn metrics(&self, label: &str) -> Option<&ClassMetrics> {
        self.per_class.get(label)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CvOptions {
    pub aggregation: Aggregation,
    /// Worker threads for fold training; 1 runs folds in order on the caller.
    pub jobs: usize,
}

impl Default for CvOptions {
    fn default() -> Self {
        Self {
            aggregation: Aggregation::Pooled,
            jobs: 1,
        }
    }
}

fn predict_into(model: &Model, test: &Dataset, cm: &mut ConfusionMatrix) -> Result<(), EvalError> {
    for issue in test {
        let gold = issue
            .label
            .ok_or_else(|| DatasetError::Unlabeled(issue.id.clone()))?;
        let prediction = forward(&model.featurize(&issue.tokens()), model);
        cm.record(gold.index(), prediction.argmax);
    }
    Ok(())
}

fn proportions(data: &Dataset) -> BTreeMap<String, f64> {
    let props = data.class_proportions();
    Label::ALL
        .iter()
        .map(|l| (l.as_str().to_owned(), props.get(l).copied().unwrap_or(0.0)))
        .collect()
}

fn run_fold(dataset: &Dataset, plan: &crate::dataset::FoldPlan, fold: usize, config: &TrainConfig) -> Result<ConfusionMatrix, EvalError> {
    let (train, test) = plan.split(dataset, fold);
    let corpus = train.training_corpus()?;
    let (model, _) = train_with_labels(&corpus, &Label::names(), config)
        .map_err(|source| EvalError::FoldTraining { fold, source })?;
    let mut cm = ConfusionMatrix::new(Label::names());
    predict_into(&model, &test, &mut cm)?;
    Ok(cm)
}

/// Stratified k-fold cross-validation: train on `k - 1` folds, predict the
/// held-out fold, and combine the `k` out-of-fold confusion matrices.
pub fn cross_validate(
    dataset: &Dataset,
    k: usize,
    config: &TrainConfig,
    seed: u64,
    options: CvOptions,
) -> Result<EvaluationReport, EvalError> {
    let plan = stratified_kfold(dataset, k, seed)?;
    let folds: Vec<ConfusionMatrix> = if options.jobs <= 1 {
        (0..k)
            .map(|fold| run_fold(dataset, &plan, fold, config))
            .collect::<Result<_, _>>()?
    } else {
        use rayon::prelude::*;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(options.jobs)
            .build()
            .map_err(|e| EvalError::Pool(e.to_string()))?;
        pool.install(|| {
            (0..k)
                .into_par_iter()
                .map(|fold| run_fold(dataset, &plan, fold, config))
                .collect::<Result<Vec<_>, _>>()
        })?
    };

    let mut pooled = ConfusionMatrix::new(Label::names());
    for cm in &folds {
        pooled.merge(cm);
    }
    let per_class = match options.aggregation {
        Aggregation::Pooled => metrics_from_confusion(&pooled),
        Aggregation::PerFoldMean => {
            let fold_metrics: Vec<_> = folds.iter().map(metrics_from_confusion).collect();
            Label::names()
                .into_iter()
                .map(|label| {
                    let p = mean(fold_metrics.iter().map(|m| m[&label].precision));
                    let r = mean(fold_metrics.iter().map(|m| m[&label].recall));
                    (label, ClassMetrics::from_precision_recall(p, r))
                })
                .collect()
        }
    };
    Ok(EvaluationReport {
        protocol: Protocol::Cv,
        config_fingerprint: config.fingerprint(),
        labels: Label::names(),
        macro_f: macro_f(&per_class),
        per_class,
        confusion: pooled,
        folds: Some(k),
        fold_seed: Some(seed),
        aggregation: Some(options.aggregation),
        test_proportions: proportions(dataset),
    })
}

/// Trains once on `train` and evaluates on `test`.
pub fn evaluate_holdout(train: &Dataset, test: &Dataset, config: &TrainConfig) -> Result<EvaluationReport, EvalError> {
    let corpus = train.training_corpus()?;
    let (model, _) = train_with_labels(&corpus, &Label::names(), config)?;
    evaluate_model(&model, test, config)
}

/// Evaluates an already trained model on `test`.
pub fn evaluate_model(model: &Model, test: &Dataset, config: &TrainConfig) -> Result<EvaluationReport, EvalError> {
    if model.labels() != Label::names().as_slice() {
        return Err(EvalError::LabelMismatch(model.labels().to_vec(), Label::names()));
    }
    let mut cm = ConfusionMatrix::new(Label::names());
    predict_into(model, test, &mut cm)?;
    let per_class = metrics_from_confusion(&cm);
    Ok(EvaluationReport {
        protocol: Protocol::Holdout,
        config_fingerprint: config.fingerprint(),
        labels: Label::names(),
        macro_f: macro_f(&per_class),
        per_class,
        confusion: cm,
        folds: None,
        fold_seed: None,
        aggregation: None,
        test_proportions: proportions(test),
    })
}

/// Signed percentage-point differences, `treatment - baseline`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricDeltas {
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f_measure: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportComparison {
    pub labels: Vec<String>,
    pub deltas: BTreeMap<String, MetricDeltas>,
}

fn delta(baseline: Option<f64>, treatment: Option<f64>) -> Option<f64> {
    Some((treatment? - baseline?) * 100.0)
}

pub fn compare_reports(baseline: &EvaluationReport, treatment: &EvaluationReport) -> Result<ReportComparison, EvalError> {
    if baseline.labels != treatment.labels {
        return Err(EvalError::LabelMismatch(baseline.labels.clone(), treatment.labels.clone()));
    }
    let deltas = baseline
        .labels
        .iter()
        .map(|label| {
            let a = baseline.per_class.get(label).copied().unwrap_or_default();
            let b = treatment.per_class.get(label).copied().unwrap_or_default();
            (
                label.clone(),
                MetricDeltas {
                    precision: delta(a.precision, b.precision),
                    recall: delta(a.recall, b.recall),
                    f_measure: delta(a.f_measure, b.f_measure),
                },
            )
        })
        .collect();
    Ok(ReportComparison {
        labels: baseline.labels.clone(),
        deltas,
    })
}

/// `+9.4%` style rendering of a point delta; `n/a` when undefined.
pub fn format_delta(value: Option<f64>) -> String {
    match value {
        // avoid printing "-0.0%"
        Some(v) if v.abs() < 0.05 => "+0.0%".to_owned(),
        Some(v) => format!("{v:+.1}%"),
        None => "n/a".to_owned(),
    }
}

fn format_percent(value: Option<f64>) -> String {
    value.map_or_else(|| "n/a".to_owned(), |v| format!("{:.2}%", v * 100.0))
}

fn render_grid(out: &mut String, header: &[String], rows: &[(String, Vec<String>)]) {
    let first = rows
        .iter()
        .map(|(name, _)| name.len())
        .chain(std::iter::once("Metric".len()))
        .max()
        .unwrap_or(0);
    let widths: Vec<usize> = header
        .iter()
        .enumerate()
        .map(|(i, h)| rows.iter().map(|(_, cells)| cells[i].len()).chain([h.len()]).max().unwrap_or(0))
        .collect();
    let _ = write!(out, "{:<first$}", "Metric");
    for (h, w) in header.iter().zip(&widths) {
        let _ = write!(out, "  {h:>w$}");
    }
    out.push('\n');
    for (name, cells) in rows {
        let _ = write!(out, "{name:<first$}");
        for (c, w) in cells.iter().zip(&widths) {
            let _ = write!(out, "  {c:>w$}");
        }
        out.push('\n');
    }
}

impl fmt::Display for EvaluationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut out = String::new();
        let protocol = match (self.protocol, self.folds) {
            (Protocol::Cv, Some(k)) => format!("{k}-fold cross-validation"),
            (Protocol::Cv, None) => "cross-validation".to_owned(),
            (Protocol::Holdout, _) => "holdout".to_owned(),
        };
        let _ = writeln!(out, "protocol: {protocol}");
        let _ = writeln!(out, "config:   {}", self.config_fingerprint);
        let rows: Vec<(String, Vec<String>)> = [
            ("Precision", (|m: &ClassMetrics| m.precision) as fn(&ClassMetrics) -> Option<f64>),
            ("Recall", |m: &ClassMetrics| m.recall),
            ("F-measure", |m: &ClassMetrics| m.f_measure),
        ]
        .iter()
        .map(|(name, pick)| {
            let cells = self
                .labels
                .iter()
                .map(|l| format_percent(self.per_class.get(l).and_then(pick)))
                .collect();
            (name.to_string(), cells)
        })
        .collect();
        render_grid(&mut out, &self.labels, &rows);
        let _ = writeln!(out, "macro F-measure: {}", format_percent(self.macro_f));
        let proportions: Vec<String> = self
            .labels
            .iter()
            .map(|l| format!("{l} {}", format_percent(self.test_proportions.get(l).copied())))
            .collect();
        let _ = writeln!(out, "evaluated proportions: {}", proportions.join(", "));
        let _ = writeln!(out, "confusion (rows gold, columns predicted):");
        let confusion_rows: Vec<(String, Vec<String>)> = self
            .labels
            .iter()
            .zip(&self.confusion.counts)
            .map(|(l, row)| (l.clone(), row.iter().map(u64::to_string).collect()))
            .collect();
        render_grid(&mut out, &self.labels, &confusion_rows);
        f.write_str(&out)
    }
}

impl fmt::Display for ReportComparison {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut out = String::new();
        let rows: Vec<(String, Vec<String>)> = [
            ("Precision", (|d: &MetricDeltas| d.precision) as fn(&MetricDeltas) -> Option<f64>),
            ("Recall", |d: &MetricDeltas| d.recall),
            ("F-measure", |d: &MetricDeltas| d.f_measure),
        ]
        .iter()
        .map(|(name, pick)| {
            let cells = self
                .labels
                .iter()
                .map(|l| format_delta(self.deltas.get(l).and_then(pick)))
                .collect();
            (name.to_string(), cells)
        })
        .collect();
        render_grid(&mut out, &self.labels, &rows);
        f.write_str(&out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels() -> Vec<String> {
        Label::names()
    }

    #[test]
    fn perfect_classifier() {
        let cm = ConfusionMatrix::from_pairs(labels(), [(0, 0), (1, 1), (2, 2), (2, 2)]);
        for m in metrics_from_confusion(&cm).values() {
            assert_eq!((m.precision, m.recall, m.f_measure), (Some(1.0), Some(1.0), Some(1.0)));
        }
    }

    #[test]
    fn eight_two_two() {
        // bug: TP 8, FP 2 (gold enhancement), FN 2 (predicted question)
        let mut pairs = vec![(0, 0); 8];
        pairs.extend([(1, 0), (1, 0), (0, 2), (0, 2)]);
        let m = metrics_from_confusion(&ConfusionMatrix::from_pairs(labels(), pairs))["bug"];
        assert!((m.precision.unwrap() - 0.8).abs() < 1e-12);
        assert!((m.recall.unwrap() - 0.8).abs() < 1e-12);
        assert!((m.f_measure.unwrap() - 0.8).abs() < 1e-12);
    }

    #[test]
    fn absent_class_is_undefined() {
        let cm = ConfusionMatrix::from_pairs(labels(), [(0, 0), (1, 1)]);
        let metrics = metrics_from_confusion(&cm);
        let q = metrics["question"];
        assert_eq!((q.precision, q.recall, q.f_measure), (None, None, None));
        assert_eq!(macro_f(&metrics), Some(1.0));
    }

    #[test]
    fn zero_precision_and_recall_give_zero_f() {
        let cm = ConfusionMatrix::from_pairs(labels(), [(0, 1), (1, 0)]);
        let m = metrics_from_confusion(&cm)["bug"];
        assert_eq!(m.f_measure, Some(0.0));
    }

    fn report_with(label_metrics: [(Option<f64>, Option<f64>); 3]) -> EvaluationReport {
        let per_class: BTreeMap<_, _> = labels()
            .into_iter()
            .zip(label_metrics)
            .map(|(l, (p, r))| (l, ClassMetrics::from_precision_recall(p, r)))
            .collect();
        EvaluationReport {
            protocol: Protocol::Holdout,
            config_fingerprint: String::new(),
            labels: labels(),
            confusion: ConfusionMatrix::new(labels()),
            macro_f: macro_f(&per_class),
            per_class,
            folds: None,
            fold_seed: None,
            aggregation: None,
            test_proportions: BTreeMap::new(),
        }
    }

    #[test]
    fn comparison_deltas() {
        let base = report_with([(Some(0.8), Some(0.70)), (Some(0.5), Some(0.5)), (None, Some(0.4))]);
        let same = compare_reports(&base, &base).unwrap();
        assert_eq!(format_delta(same.deltas["bug"].recall), "+0.0%");

        let treated = report_with([(Some(0.8), Some(0.794)), (Some(0.5), Some(0.5)), (Some(0.3), Some(0.4))]);
        let cmp = compare_reports(&base, &treated).unwrap();
        assert!((cmp.deltas["bug"].recall.unwrap() - 9.4).abs() < 1e-9);
        assert_eq!(format_delta(cmp.deltas["bug"].recall), "+9.4%");
        assert_eq!(cmp.deltas["question"].precision, None);
        assert_eq!(format_delta(None), "n/a");
        assert_eq!(format_delta(Some(-0.3)), "-0.3%");
        let table = cmp.to_string();
        assert!(table.contains("+9.4%"), "{table}");
    }

    #[test]
    fn report_table_and_json() {
        let report = report_with([(Some(0.82), Some(0.84)), (Some(0.89), Some(0.76)), (None, None)]);
        let table = report.to_string();
        assert!(table.contains("82.00%"));
        assert!(table.contains("n/a"));
        let parsed = EvaluationReport::from_json(&report.to_json()).unwrap();
        assert_eq!(parsed, report);
    }
}
