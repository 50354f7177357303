use std::path::PathBuf;
use std::sync::Arc;

use commentguard::backend::{evaluate, Backend, ModelBackend, Outcome};
use commentguard::corpus::read_corpus;
use commentguard::llm::ReplayTransport;
use commentguard_core::classifiers::{ClassifierModel, RemoteSpec};
use commentguard_core::llm::{parse_reply, LlmConfig};
use commentguard_core::{BinaryLabel, RawLabel};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

fn items() -> Vec<(String, BinaryLabel)> {
    let corpus = read_corpus(&fixture("llm50_corpus.jsonl")).unwrap();
    assert!(corpus.rejected.is_empty());
    corpus
        .labeled()
        .unwrap()
        .iter()
        .map(|c| (c.text().to_string(), c.binary()))
        .collect()
}

fn backend() -> ModelBackend {
    let cfg = LlmConfig {
        retries: 0,
        backoff_ms: 0,
        ..LlmConfig::default()
    };
    let replay = ReplayTransport::open(&fixture("llm50_replay.jsonl")).unwrap();
    assert_eq!(replay.len(), 50);
    ModelBackend::with_transport(
        "gpt-4-1106-preview",
        ClassifierModel::remote(RemoteSpec::Chat(cfg)),
        Arc::new(replay),
    )
}

#[test]
fn replayed_evaluation_is_bit_reproducible() {
    let items = items();
    assert_eq!(items.len(), 50);
    let first = evaluate(&backend(), &items).unwrap();
    let second = evaluate(&backend(), &items).unwrap();
    assert_eq!(first, second);
    let bits = |r: &commentguard::backend::EvalRun| {
        let m = r.metrics;
        [
            m.precision,
            m.recall,
            m.f1,
            m.accuracy.unwrap(),
            m.roc_auc.unwrap(),
        ]
        .map(f64::to_bits)
    };
    assert_eq!(bits(&first), bits(&second));
    assert_eq!(first.matrix.total(), 50);
    assert_eq!(first.unmappable, 2);
    assert_eq!(
        first
            .outcomes
            .iter()
            .filter(|o| **o == Outcome::Unmappable)
            .count(),
        2
    );
}

#[test]
fn hard_scores_give_balanced_accuracy_auc() {
    let run = evaluate(&backend(), &items()).unwrap();
    let auc = run.metrics.roc_auc.unwrap();
    assert!((auc - run.matrix.balanced_accuracy()).abs() < 1e-12);
}

#[test]
fn chat_backend_is_flagged_nondeterministic() {
    assert!(!backend().deterministic());
}

#[test]
fn reply_normalization_table() {
    let table = [
        ("Spam.", Some(RawLabel::Spam)),
        ("genuine", Some(RawLabel::Genuine)),
        ("  SCAM\n", Some(RawLabel::Scam)),
        ("'spam'", Some(RawLabel::Spam)),
        ("I cannot classify this", None),
        ("", None),
    ];
    for (reply, expected) in table {
        assert_eq!(parse_reply(reply).ok(), expected, "reply {reply:?}");
    }
}
