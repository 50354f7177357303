//! One contract over native models, remote models and test stubs, plus the
//! evaluation loop that runs any backend over a labeled set.

use std::sync::Arc;

use commentguard_core::classifiers::{
    ClassifierError, ClassifierModel, ModelBody, Prediction, RemoteSpec,
};
use commentguard_core::metrics::{evaluate_scored, ConfusionMatrix, MetricSet, MetricsError};
use commentguard_core::BinaryLabel;

use crate::llm::{self, HttpTransport, LlmError, Transport};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BackendError {
    #[error(transparent)]
    Classifier(#[from] ClassifierError),
    #[error(transparent)]
    Remote(#[from] LlmError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

impl BackendError {
    /// True when the backend answered but the reply named no label.
    pub fn is_unmappable(&self) -> bool {
        matches!(self, BackendError::Remote(LlmError::UnmappableReply(_)))
    }

    /// True when the caller supplied bad input rather than the backend failing.
    pub fn is_input_error(&self) -> bool {
        matches!(self, BackendError::Remote(LlmError::Prompt(_)))
    }
}

pub trait Backend: Send + Sync {
    /// Identifier reported to clients.
    fn id(&self) -> &str;
    fn kind(&self) -> &str;
    fn classify(&self, text: &str) -> Result<Prediction, BackendError>;
    /// Whether identical inputs always give identical outputs.
    fn deterministic(&self) -> bool;
}

/// A loaded model file; remote kinds go through `transport`.
pub struct ModelBackend {
    id: String,
    model: ClassifierModel,
    transport: Option<Arc<dyn Transport>>,
}

impl ModelBackend {
    /// Native models need no transport; remote ones get a live HTTP client.
    pub fn new(id: impl Into<String>, model: ClassifierModel) -> Result<Self, BackendError> {
        let transport: Option<Arc<dyn Transport>> = if model.kind().is_native() {
            None
        } else {
            let http = HttpTransport::new()
                .map_err(|last| LlmError::RemoteUnavailable { attempts: 0, last })?;
            Some(Arc::new(http))
        };
        Ok(ModelBackend {
            id: id.into(),
            model,
            transport,
        })
    }

    pub fn with_transport(
        id: impl Into<String>,
        model: ClassifierModel,
        transport: Arc<dyn Transport>,
    ) -> Self {
        ModelBackend {
            id: id.into(),
            model,
            transport: Some(transport),
        }
    }

    pub fn model(&self) -> &ClassifierModel {
        &self.model
    }
}

impl Backend for ModelBackend {
    fn id(&self) -> &str {
        &self.id
    }

    fn kind(&self) -> &str {
        self.model.kind().as_str()
    }

    fn classify(&self, text: &str) -> Result<Prediction, BackendError> {
        let ModelBody::Remote(spec) = &self.model.body else {
            return Ok(self.model.predict(text)?);
        };
        let transport = self
            .transport
            .as_deref()
            .ok_or(ClassifierError::RemoteModel)?;
        Ok(match spec {
            RemoteSpec::Chat(cfg) => llm::classify_remote(text, cfg, transport)?,
            RemoteSpec::InferenceEndpoint(cfg) => {
                llm::classify_inference_endpoint(text, cfg, transport)?
            }
        })
    }

    fn deterministic(&self) -> bool {
        // chat models are not deterministic even at temperature 0
        !matches!(self.model.body, ModelBody::Remote(RemoteSpec::Chat(_)))
    }
}

/// Fixed verdict for every input.
#[derive(Debug, Clone, PartialEq)]
pub struct StubBackend {
    pub id: String,
    pub prediction: Prediction,
}

impl StubBackend {
    pub fn new(id: impl Into<String>, label: BinaryLabel, score: f64) -> Self {
        StubBackend {
            id: id.into(),
            prediction: Prediction { label, score },
        }
    }
}

impl Backend for StubBackend {
    fn id(&self) -> &str {
        &self.id
    }

    fn kind(&self) -> &str {
        "stub"
    }

    fn classify(&self, _: &str) -> Result<Prediction, BackendError> {
        Ok(self.prediction)
    }

    fn deterministic(&self) -> bool {
        true
    }
}

/// Outcome for one evaluated item.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Outcome {
    Predicted(Prediction),
    /// The backend replied outside the label set; scored as genuine.
    Unmappable,
}

impl Outcome {
    pub fn prediction(&self) -> Prediction {
        match self {
            Outcome::Predicted(p) => *p,
            Outcome::Unmappable => Prediction::hard(BinaryLabel::Genuine),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalRun {
    pub matrix: ConfusionMatrix,
    pub metrics: MetricSet,
    pub unmappable: usize,
    pub outcomes: Vec<Outcome>,
}

/// Classifies every item and scores the result against its gold label.
/// Unmappable replies are tallied and counted as genuine; any other backend
/// error aborts the run.
pub fn evaluate<B, S>(backend: &B, items: &[(S, BinaryLabel)]) -> Result<EvalRun, BackendError>
where
    B: Backend + ?Sized,
    S: AsRef<str>,
{
    let mut outcomes = Vec::with_capacity(items.len());
    for (text, _) in items {
        match backend.classify(text.as_ref()) {
            Ok(p) => outcomes.push(Outcome::Predicted(p)),
            Err(e) if e.is_unmappable() => outcomes.push(Outcome::Unmappable),
            Err(e) => return Err(e),
        }
    }
    let pred: Vec<BinaryLabel> = outcomes.iter().map(|o| o.prediction().label).collect();
    let scores: Vec<f64> = outcomes.iter().map(|o| o.prediction().score).collect();
    let gold: Vec<BinaryLabel> = items.iter().map(|(_, y)| *y).collect();
    let (matrix, metrics) = evaluate_scored(&pred, &scores, &gold)?;
    let unmappable = outcomes
        .iter()
        .filter(|o| **o == Outcome::Unmappable)
        .count();
    Ok(EvalRun {
        matrix,
        metrics,
        unmappable,
        outcomes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::ScriptedTransport;
    use commentguard_core::llm::LlmConfig;

    #[test]
    fn unmappable_counts_as_genuine() {
        let cfg = LlmConfig {
            backoff_ms: 0,
            ..LlmConfig::default()
        };
        let t = ScriptedTransport::chat(|user| {
            if user.ends_with("'win a prize'") {
                "scam".into()
            } else if user.ends_with("'hmm'") {
                "no idea".into()
            } else {
                "genuine".into()
            }
        });
        let b = ModelBackend::with_transport(
            "gpt",
            ClassifierModel::remote(RemoteSpec::Chat(cfg)),
            Arc::new(t),
        );
        assert!(!b.deterministic());
        let items = [
            ("win a prize", BinaryLabel::Fraud),
            ("hmm", BinaryLabel::Fraud),
            ("nice", BinaryLabel::Genuine),
        ];
        let run = evaluate(&b, &items).unwrap();
        assert_eq!(run.unmappable, 1);
        assert_eq!(run.matrix, ConfusionMatrix::new(1, 0, 1, 1));
        assert_eq!(run.outcomes[1], Outcome::Unmappable);
    }

    #[test]
    fn stub_passes_through() {
        let s = StubBackend::new("stub", BinaryLabel::Fraud, 0.99);
        assert_eq!(
            s.classify("x").unwrap(),
            Prediction {
                label: BinaryLabel::Fraud,
                score: 0.99
            }
        );
    }
}
