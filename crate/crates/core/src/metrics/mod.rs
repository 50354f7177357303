//! Evaluation mathematics.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::corpus::BinaryLabel;

mod auc;
mod kappa;
mod reconstruct;
mod report;

pub use auc::roc_auc;
pub use kappa::{fleiss_kappa, RatingMatrix};
pub use reconstruct::{reconstruct_confusion, Reconstruction};
pub use report::{render_report, round_half_up, Report};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MetricsError {
    #[error("no labels to compare")]
    EmptyInput,
    #[error("prediction and gold lengths differ ({pred} vs {gold})")]
    LengthMismatch { pred: usize, gold: usize },
    #[error("confusion matrix is empty")]
    EmptyMatrix,
    #[error("both classes must be present")]
    SingleClassInput,
    #[error("scores must be finite")]
    InvalidScore,
    #[error("invalid rating matrix: {0}")]
    InvalidMatrix(&'static str),
    #[error("at least two raters per item are required")]
    TooFewRaters,
}

/// 2x2 counts with fraud as the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

impl ConfusionMatrix {
    pub const fn new(tp: u64, fp: u64, fn_: u64, tn: u64) -> Self {
        ConfusionMatrix { tp, fp, fn_, tn }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }

    pub fn positives(&self) -> u64 {
        self.tp + self.fn_
    }

    pub fn negatives(&self) -> u64 {
        self.fp + self.tn
    }

    pub fn record(&mut self, pred: BinaryLabel, gold: BinaryLabel) {
        match (pred, gold) {
            (BinaryLabel::Fraud, BinaryLabel::Fraud) => self.tp += 1,
            (BinaryLabel::Fraud, BinaryLabel::Genuine) => self.fp += 1,
            (BinaryLabel::Genuine, BinaryLabel::Fraud) => self.fn_ += 1,
            (BinaryLabel::Genuine, BinaryLabel::Genuine) => self.tn += 1,
        }
    }

    fn ratio(num: u64, den: u64) -> f64 {
        if den == 0 {
            0.0
        } else {
            num as f64 / den as f64
        }
    }

    pub fn precision(&self) -> f64 {
        Self::ratio(self.tp, self.tp + self.fp)
    }

    /// True positive rate.
    pub fn recall(&self) -> f64 {
        Self::ratio(self.tp, self.tp + self.fn_)
    }

    /// True negative rate, `tn / (tn + fp)`.
    pub fn specificity(&self) -> f64 {
        Self::ratio(self.tn, self.tn + self.fp)
    }

    pub fn accuracy(&self) -> f64 {
        Self::ratio(self.tp + self.tn, self.total())
    }

    /// ROC AUC of a hard 0/1 classifier: `(TPR + TNR) / 2`.
    pub fn balanced_accuracy(&self) -> f64 {
        (self.recall() + self.specificity()) / 2.0
    }
}

impl core::ops::Add for ConfusionMatrix {
    type Output = ConfusionMatrix;

    fn add(self, o: ConfusionMatrix) -> ConfusionMatrix {
        ConfusionMatrix::new(
            self.tp + o.tp,
            self.fp + o.fp,
            self.fn_ + o.fn_,
            self.tn + o.tn,
        )
    }
}

impl core::iter::Sum for ConfusionMatrix {
    fn sum<I: Iterator<Item = ConfusionMatrix>>(iter: I) -> Self {
        iter.fold(ConfusionMatrix::default(), |a, b| a + b)
    }
}

pub fn confusion(
    pred: &[BinaryLabel],
    gold: &[BinaryLabel],
) -> Result<ConfusionMatrix, MetricsError> {
    if pred.len() != gold.len() {
        return Err(MetricsError::LengthMismatch {
            pred: pred.len(),
            gold: gold.len(),
        });
    }
    if pred.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let mut m = ConfusionMatrix::default();
    for (&p, &g) in pred.iter().zip(gold) {
        m.record(p, g);
    }
    Ok(m)
}

/// Micro-aggregation: cell-wise sum across matrices.
pub fn aggregate(matrices: &[ConfusionMatrix]) -> Result<ConfusionMatrix, MetricsError> {
    if matrices.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    Ok(matrices.iter().copied().sum())
}

/// Harmonic mean of precision and recall; 0 when both are 0.
pub fn f1_score(precision: f64, recall: f64) -> f64 {
    if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    }
}

/// Summary metrics for one model. Accuracy and ROC AUC are optional so rows
/// known only by precision and recall can be reported too.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricSet {
    pub accuracy: Option<f64>,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub roc_auc: Option<f64>,
}

impl MetricSet {
    pub fn from_precision_recall(precision: f64, recall: f64) -> Self {
        MetricSet {
            accuracy: None,
            precision,
            recall,
            f1: f1_score(precision, recall),
            roc_auc: None,
        }
    }

    pub fn with_accuracy(mut self, accuracy: f64) -> Self {
        self.accuracy = Some(accuracy);
        self
    }

    pub fn with_roc_auc(mut self, auc: f64) -> Self {
        self.roc_auc = Some(auc);
        self
    }
}

pub fn derive_metrics(m: &ConfusionMatrix) -> Result<MetricSet, MetricsError> {
    if m.total() == 0 {
        return Err(MetricsError::EmptyMatrix);
    }
    Ok(MetricSet::from_precision_recall(m.precision(), m.recall()).with_accuracy(m.accuracy()))
}

/// Confusion matrix, metrics and (when both classes are present) ROC AUC for
/// scored predictions.
pub fn evaluate_scored(
    pred: &[BinaryLabel],
    scores: &[f64],
    gold: &[BinaryLabel],
) -> Result<(ConfusionMatrix, MetricSet), MetricsError> {
    let m = confusion(pred, gold)?;
    let mut metrics = derive_metrics(&m)?;
    match roc_auc(scores, gold) {
        Ok(auc) => metrics.roc_auc = Some(auc),
        Err(MetricsError::SingleClassInput) => {}
        Err(e) => return Err(e),
    }
    Ok((m, metrics))
}

/// Labels collapsed from a 0/1 vector; handy for tests and fixtures.
pub fn labels_from_bits(bits: &[u8]) -> Vec<BinaryLabel> {
    bits.iter()
        .map(|&b| {
            if b == 0 {
                BinaryLabel::Genuine
            } else {
                BinaryLabel::Fraud
            }
        })
        .collect()
}
