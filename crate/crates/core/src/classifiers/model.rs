//! The trained-model envelope shared by every backend kind.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use super::{
    train_decision_tree, train_logistic_regression, train_naive_bayes, train_random_forest,
    ClassifierError, Example, ForestParams, LogisticParams, NaiveBayesParams, Prediction,
    TrainConfig, TreeParams, DEFAULT_THRESHOLD,
};
use crate::corpus::BinaryLabel;
use crate::llm::{EndpointConfig, LlmConfig};
use crate::textproc::{
    build_vocabulary, count_vectorize, fit_idf, tfidf_vectorize, tokenize, IdfTable, SparseVector,
    Token, Vocabulary,
};

pub const FORMAT_VERSION: &str = "1.0";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    NaiveBayes,
    LogisticRegression,
    DecisionTree,
    RandomForest,
    Remote,
}

impl ModelKind {
    pub const NATIVE: [ModelKind; 4] = [
        ModelKind::NaiveBayes,
        ModelKind::LogisticRegression,
        ModelKind::DecisionTree,
        ModelKind::RandomForest,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::NaiveBayes => "naive_bayes",
            ModelKind::LogisticRegression => "logistic_regression",
            ModelKind::DecisionTree => "decision_tree",
            ModelKind::RandomForest => "random_forest",
            ModelKind::Remote => "remote",
        }
    }

    pub fn is_native(self) -> bool {
        self != ModelKind::Remote
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Connection details for a remote backend.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "protocol", rename_all = "snake_case")]
pub enum RemoteSpec {
    /// Zero-shot chat-completion model.
    Chat(LlmConfig),
    /// A service speaking the single-comment classification contract.
    InferenceEndpoint(EndpointConfig),
}

/// Kind tag plus kind-specific parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "parameters", rename_all = "snake_case")]
pub enum ModelBody {
    NaiveBayes(NaiveBayesParams),
    LogisticRegression(LogisticParams),
    DecisionTree(TreeParams),
    RandomForest(ForestParams),
    Remote(RemoteSpec),
}

impl ModelBody {
    pub fn kind(&self) -> ModelKind {
        match self {
            ModelBody::NaiveBayes(_) => ModelKind::NaiveBayes,
            ModelBody::LogisticRegression(_) => ModelKind::LogisticRegression,
            ModelBody::DecisionTree(_) => ModelKind::DecisionTree,
            ModelBody::RandomForest(_) => ModelKind::RandomForest,
            ModelBody::Remote(_) => ModelKind::Remote,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierModel {
    pub format_version: String,
    pub threshold: f64,
    pub vocabulary: Option<Vocabulary>,
    pub idf: Option<IdfTable>,
    #[serde(flatten)]
    pub body: ModelBody,
}

impl ClassifierModel {
    /// Fits vocabulary, idf and the chosen classifier on labeled texts.
    pub fn train<S: AsRef<str>>(
        kind: ModelKind,
        texts: &[(S, BinaryLabel)],
        cfg: &TrainConfig,
    ) -> Result<Self, ClassifierError> {
        cfg.validate()?;
        if texts.is_empty() {
            return Err(ClassifierError::EmptyInput);
        }
        let docs: Vec<Vec<Token>> = texts.iter().map(|(t, _)| tokenize(t.as_ref())).collect();
        let vocab = build_vocabulary(&docs, cfg.min_df, cfg.max_vocab)?;
        let idf = fit_idf(&docs, &vocab)?;
        let dim = vocab.len();
        let examples: Vec<Example> = docs
            .iter()
            .zip(texts)
            .map(|(d, (_, y))| {
                let x = match kind {
                    ModelKind::NaiveBayes => count_vectorize(d, &vocab),
                    _ => tfidf_vectorize(d, &vocab, &idf),
                };
                (x, *y)
            })
            .collect();
        let body = match kind {
            ModelKind::NaiveBayes => ModelBody::NaiveBayes(train_naive_bayes(&examples, dim, cfg)?),
            ModelKind::LogisticRegression => ModelBody::LogisticRegression(
                train_logistic_regression(&examples, dim, cfg)?.params,
            ),
            ModelKind::DecisionTree => {
                ModelBody::DecisionTree(train_decision_tree(&examples, dim, cfg)?)
            }
            ModelKind::RandomForest => {
                ModelBody::RandomForest(train_random_forest(&examples, dim, cfg)?)
            }
            ModelKind::Remote => return Err(ClassifierError::RemoteModel),
        };
        Ok(ClassifierModel {
            format_version: FORMAT_VERSION.into(),
            threshold: DEFAULT_THRESHOLD,
            vocabulary: Some(vocab),
            idf: Some(idf),
            body,
        })
    }

    /// Envelope for a remote backend (no vocabulary).
    pub fn remote(spec: RemoteSpec) -> Self {
        ClassifierModel {
            format_version: FORMAT_VERSION.into(),
            threshold: DEFAULT_THRESHOLD,
            vocabulary: None,
            idf: None,
            body: ModelBody::Remote(spec),
        }
    }

    pub fn kind(&self) -> ModelKind {
        self.body.kind()
    }

    pub fn with_threshold(mut self, threshold: f64) -> Self {
        self.threshold = threshold;
        self
    }

    /// Feature vector the model consumes for `text`.
    pub fn featurize(&self, text: &str) -> Result<SparseVector, ClassifierError> {
        let (Some(vocab), Some(idf)) = (&self.vocabulary, &self.idf) else {
            return Err(ClassifierError::RemoteModel);
        };
        let tokens = tokenize(text);
        Ok(match self.body {
            ModelBody::NaiveBayes(_) => count_vectorize(&tokens, vocab),
            _ => tfidf_vectorize(&tokens, vocab, idf),
        })
    }

    /// Fraud probability for an already featurized input.
    pub fn score_features(&self, x: &SparseVector) -> Result<f64, ClassifierError> {
        Ok(match &self.body {
            ModelBody::NaiveBayes(p) => p.score(x),
            ModelBody::LogisticRegression(p) => p.score(x),
            ModelBody::DecisionTree(p) => p.score(x),
            ModelBody::RandomForest(p) => p.score(x),
            ModelBody::Remote(_) => return Err(ClassifierError::RemoteModel),
        })
    }

    /// Native prediction. Remote models return [`ClassifierError::RemoteModel`].
    pub fn predict(&self, text: &str) -> Result<Prediction, ClassifierError> {
        let x = self.featurize(text)?;
        let score = self.score_features(&x)?;
        Ok(Prediction::from_score(score, self.threshold))
    }

    /// Structural checks applied after loading.
    pub fn validate(&self) -> Result<(), ClassifierError> {
        let corrupt = |what| Err(ClassifierError::Corrupt(what));
        if !(self.threshold.is_finite() && (0.0..=1.0).contains(&self.threshold)) {
            return corrupt("threshold outside [0,1]");
        }
        let native = self.kind().is_native();
        match (&self.vocabulary, &self.idf) {
            (Some(v), Some(idf)) if native => {
                if idf.check(v).is_err() || idf.idf.iter().any(|x| !x.is_finite() || *x < 1.0) {
                    return corrupt("idf table does not match vocabulary");
                }
            }
            (None, None) if !native => {}
            _ => return corrupt("vocabulary must be present exactly for native kinds"),
        }
        let dim = self.vocabulary.as_ref().map_or(0, Vocabulary::len);
        let finite = |xs: &[f64]| xs.iter().all(|x| x.is_finite());
        let ok = match &self.body {
            ModelBody::NaiveBayes(p) => {
                p.log_likelihood.iter().all(|l| l.len() == dim && finite(l))
                    && finite(&p.log_prior)
                    && p.alpha > 0.0
            }
            ModelBody::LogisticRegression(p) => {
                p.weights.len() == dim && finite(&p.weights) && p.bias.is_finite()
            }
            ModelBody::DecisionTree(p) => p.validate(dim),
            ModelBody::RandomForest(p) => {
                !p.trees.is_empty() && p.trees.iter().all(|t| t.validate(dim))
            }
            ModelBody::Remote(_) => true,
        };
        if !ok {
            return corrupt("parameters are inconsistent with the vocabulary");
        }
        Ok(())
    }
}
