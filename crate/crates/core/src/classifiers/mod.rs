//! Baseline classifiers behind one prediction contract.
//!
//! Naive Bayes consumes raw term counts; logistic regression, the decision
//! tree and the random forest consume L2-normalized TF-IDF vectors.

use alloc::string::String;

use serde::{Deserialize, Serialize};

use crate::corpus::BinaryLabel;
use crate::textproc::{SparseVector, TextError, DEFAULT_MAX_SIZE, DEFAULT_MIN_DF};

pub mod forest;
pub mod logistic;
pub mod model;
pub mod naive_bayes;
pub mod tree;

pub use forest::{train_random_forest, ForestParams};
pub use logistic::{train_logistic_regression, LogisticParams};
pub use model::{ClassifierModel, ModelBody, ModelKind, RemoteSpec, FORMAT_VERSION};
pub use naive_bayes::{train_naive_bayes, NaiveBayesParams};
pub use tree::{gini, train_decision_tree, TreeParams};

pub const DEFAULT_THRESHOLD: f64 = 0.5;

/// A verdict with the model's fraud probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub label: BinaryLabel,
    pub score: f64,
}

impl Prediction {
    /// Fraud iff `score > threshold`; a score equal to the threshold is genuine.
    pub fn from_score(score: f64, threshold: f64) -> Self {
        let label = if score > threshold {
            BinaryLabel::Fraud
        } else {
            BinaryLabel::Genuine
        };
        Prediction { label, score }
    }

    /// Hard verdict with score 1.0 (fraud) or 0.0 (genuine).
    pub fn hard(label: BinaryLabel) -> Self {
        Prediction {
            label,
            score: label.as_f64(),
        }
    }
}

/// Per-split feature sampling for forest trees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureSubsample {
    /// Every feature is a split candidate.
    All,
    /// `ceil(sqrt(d))` features.
    Sqrt,
    /// A fixed fraction of `d`, at least one.
    Fraction(f64),
}

impl FeatureSubsample {
    pub fn count(self, dim: usize) -> usize {
        let k = match self {
            FeatureSubsample::All => dim,
            FeatureSubsample::Sqrt => libm::ceil(libm::sqrt(dim as f64)) as usize,
            FeatureSubsample::Fraction(f) => libm::ceil(f * dim as f64) as usize,
        };
        k.clamp(1, dim.max(1))
    }
}

/// Hyperparameters for the native classifiers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub l2: f64,
    /// Laplace smoothing for naive Bayes.
    pub alpha: f64,
    pub max_depth: usize,
    pub min_leaf: usize,
    pub n_trees: usize,
    pub feature_subsample: FeatureSubsample,
    pub bootstrap: bool,
    pub seed: u64,
    pub min_df: usize,
    pub max_vocab: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.1,
            epochs: 200,
            l2: 1e-4,
            alpha: 1.0,
            max_depth: 12,
            min_leaf: 2,
            n_trees: 100,
            feature_subsample: FeatureSubsample::Sqrt,
            bootstrap: true,
            seed: 42,
            min_df: DEFAULT_MIN_DF,
            max_vocab: DEFAULT_MAX_SIZE,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), ClassifierError> {
        let bad = |what: &'static str| Err(ClassifierError::InvalidConfig(what));
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return bad("learning_rate must be positive");
        }
        if self.epochs == 0 {
            return bad("epochs must be positive");
        }
        if !(self.l2.is_finite() && self.l2 >= 0.0) {
            return bad("l2 must be non-negative");
        }
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return bad("alpha must be positive");
        }
        if self.max_depth == 0 || self.min_leaf == 0 || self.n_trees == 0 {
            return bad("max_depth, min_leaf and n_trees must be positive");
        }
        if let FeatureSubsample::Fraction(f) = self.feature_subsample {
            if !(f > 0.0 && f <= 1.0) {
                return bad("feature_subsample fraction must lie in (0,1]");
            }
        }
        if self.min_df == 0 || self.max_vocab == 0 {
            return bad("min_df and max_vocab must be positive");
        }
        Ok(())
    }
}

/// Fine-tuning job description for an externally trained transformer.
/// Defaults reproduce the reference configuration; nothing here trains.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TransformerJobConfig {
    pub pretrained_name: String,
    pub tokenizer: String,
    pub epochs: u32,
    pub max_length: u32,
    pub batch_size: u32,
    pub optimizer: OptimizerConfig,
    pub scheduler: SchedulerConfig,
    pub loss: String,
    pub split: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub name: String,
    pub learning_rate: f64,
    pub correct_bias: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchedulerConfig {
    pub kind: String,
    pub warmup_steps: u32,
}

impl Default for TransformerJobConfig {
    fn default() -> Self {
        TransformerJobConfig {
            pretrained_name: "bert-base-cased".into(),
            tokenizer: "BertTokenizer".into(),
            epochs: 10,
            max_length: 512,
            batch_size: 16,
            optimizer: OptimizerConfig {
                name: "AdamW".into(),
                learning_rate: 2e-5,
                correct_bias: false,
            },
            scheduler: SchedulerConfig {
                kind: "linear".into(),
                warmup_steps: 0,
            },
            loss: "cross_entropy".into(),
            split: [0.8, 0.1, 0.1],
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ClassifierError {
    #[error("training data is empty")]
    EmptyInput,
    #[error("training data contains a single class")]
    SingleClassInput,
    #[error("training loss became non-finite or increased at epoch {epoch}")]
    NonFiniteLoss { epoch: usize },
    #[error("invalid training configuration: {0}")]
    InvalidConfig(&'static str),
    #[error("feature index {index} outside dimension {dim}")]
    DimensionMismatch { index: usize, dim: usize },
    #[error("remote models need a transport to predict")]
    RemoteModel,
    #[error("model is inconsistent: {0}")]
    Corrupt(&'static str),
    #[error(transparent)]
    Text(#[from] TextError),
}

/// A training example: feature vector plus gold label.
pub type Example = (SparseVector, BinaryLabel);

pub(crate) fn check_examples(train: &[Example], dim: usize) -> Result<(), ClassifierError> {
    if train.is_empty() {
        return Err(ClassifierError::EmptyInput);
    }
    for (x, _) in train {
        if let Some(&(index, _)) = x.entries().last() {
            if index >= dim {
                return Err(ClassifierError::DimensionMismatch { index, dim });
            }
        }
    }
    Ok(())
}

pub(crate) fn require_both_classes(train: &[Example]) -> Result<(), ClassifierError> {
    let fraud = train.iter().filter(|e| e.1.is_fraud()).count();
    if fraud == 0 || fraud == train.len() {
        return Err(ClassifierError::SingleClassInput);
    }
    Ok(())
}

/// Numerically stable logistic function.
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + libm::exp(-z))
    } else {
        let e = libm::exp(z);
        e / (1.0 + e)
    }
}
