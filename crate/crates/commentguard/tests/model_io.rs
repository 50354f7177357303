use commentguard::model_io::{
    load_model, load_model_expecting, load_model_file, save_model, save_model_file, ModelIoError,
};
use commentguard_core::classifiers::{ClassifierModel, ModelKind, TrainConfig};
use commentguard_core::BinaryLabel::{self, Fraud, Genuine};
use proptest::prelude::*;
use serde_json::Value;

const WORDS: &[&str] = &[
    "free", "crypto", "dm", "now", "love", "this", "nice", "post", "profit", "photo",
];

fn data() -> Vec<(String, BinaryLabel)> {
    (0..40)
        .map(|i| {
            let fraud = i % 3 == 0;
            let text = if fraud {
                format!("free crypto dm {}", WORDS[i % WORDS.len()])
            } else {
                format!("love this photo {}", WORDS[(i + 3) % WORDS.len()])
            };
            (text, if fraud { Fraud } else { Genuine })
        })
        .collect()
}

fn train(kind: ModelKind) -> ClassifierModel {
    let cfg = TrainConfig {
        n_trees: 5,
        epochs: 50,
        ..TrainConfig::default()
    };
    ClassifierModel::train(kind, &data(), &cfg).unwrap()
}

fn bytes(m: &ClassifierModel) -> Vec<u8> {
    let mut buf = Vec::new();
    save_model(m, &mut buf).unwrap();
    buf
}

#[test]
fn file_round_trip_every_native_kind() {
    let dir = tempfile::tempdir().unwrap();
    for kind in ModelKind::NATIVE {
        let m = train(kind);
        let path = dir.path().join(format!("{}.json", kind.as_str()));
        save_model_file(&m, &path).unwrap();
        let back = load_model_file(&path).unwrap();
        assert_eq!(back, m, "{}", kind.as_str());
        assert_eq!(bytes(&back), std::fs::read(&path).unwrap());
        let doc: Value = serde_json::from_slice(&std::fs::read(&path).unwrap()).unwrap();
        for key in [
            "format_version",
            "kind",
            "threshold",
            "vocabulary",
            "idf",
            "parameters",
        ] {
            assert!(
                doc.get(key).is_some(),
                "{key} missing for {}",
                kind.as_str()
            );
        }
        assert!(load_model_expecting(bytes(&m).as_slice(), kind).is_ok());
    }
}

#[test]
fn rejects_bad_files() {
    let m = train(ModelKind::LogisticRegression);
    let mut doc: Value = serde_json::from_slice(&bytes(&m)).unwrap();
    doc["format_version"] = "99.0".into();
    assert!(
        matches!(load_model(doc.to_string().as_bytes()), Err(ModelIoError::UnsupportedVersion(v)) if v == "99.0")
    );

    let b = bytes(&m);
    for cut in [0, 1, b.len() / 3, b.len() - 3] {
        assert!(
            matches!(load_model(&b[..cut]), Err(ModelIoError::CorruptModel(_))),
            "cut {cut}"
        );
    }

    let mut doc: Value = serde_json::from_slice(&bytes(&train(ModelKind::RandomForest))).unwrap();
    doc["kind"] = "logistic_regression".into();
    let err = load_model(doc.to_string().as_bytes()).unwrap_err();
    assert!(
        matches!(err, ModelIoError::KindMismatch { ref found, .. } if found == "random_forest"),
        "{err}"
    );

    let missing = load_model_file(std::path::Path::new("does/not/exist.json")).unwrap_err();
    assert!(matches!(missing, ModelIoError::Io(_)));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn predictions_survive_round_trip(
        kind in prop::sample::select(ModelKind::NATIVE.to_vec()),
        words in prop::collection::vec(prop::sample::select(WORDS), 0..8),
    ) {
        let m = train(kind);
        let back = load_model(bytes(&m).as_slice()).unwrap();
        let text = words.join(" ");
        prop_assert_eq!(m.predict(&text).unwrap(), back.predict(&text).unwrap());
    }
}
