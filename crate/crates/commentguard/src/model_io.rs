//! Model file persistence.
//!
//! A model file is one JSON document with top-level `format_version`, `kind`,
//! `threshold`, `vocabulary`, `idf` and `parameters`. Floats are written in
//! shortest round-trip form and parsed back exactly.

use std::fs::File;
use std::io::{self, BufWriter, Read, Write};
use std::path::Path;

use commentguard_core::classifiers::{ClassifierModel, ModelBody, ModelKind, FORMAT_VERSION};
use serde_json::Value;

#[derive(Debug, thiserror::Error)]
pub enum ModelIoError {
    #[error("unsupported model format version `{0}`")]
    UnsupportedVersion(String),
    #[error("corrupt model file: {0}")]
    CorruptModel(String),
    #[error("model kind mismatch: file says `{declared}`, found `{found}`")]
    KindMismatch { declared: String, found: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

pub fn save_model<W: Write>(model: &ClassifierModel, mut sink: W) -> Result<(), ModelIoError> {
    serde_json::to_writer(&mut sink, model)
        .map_err(|e| ModelIoError::CorruptModel(e.to_string()))?;
    sink.write_all(b"\n")?;
    sink.flush()?;
    Ok(())
}

pub fn save_model_file(model: &ClassifierModel, path: &Path) -> Result<(), ModelIoError> {
    let file = File::create(path)?;
    save_model(model, BufWriter::new(file))
}

fn corrupt(what: impl Into<String>) -> ModelIoError {
    ModelIoError::CorruptModel(what.into())
}

fn kinds() -> impl Iterator<Item = ModelKind> {
    ModelKind::NATIVE.into_iter().chain([ModelKind::Remote])
}

fn body_as(kind: ModelKind, parameters: &Value) -> Option<ModelBody> {
    let tagged = serde_json::json!({ "kind": kind.as_str(), "parameters": parameters });
    serde_json::from_value(tagged).ok()
}

pub fn load_model<R: Read>(mut source: R) -> Result<ClassifierModel, ModelIoError> {
    let mut text = String::new();
    source.read_to_string(&mut text)?;
    let doc: Value = serde_json::from_str(&text).map_err(|e| corrupt(e.to_string()))?;
    let obj = doc
        .as_object()
        .ok_or_else(|| corrupt("top level is not an object"))?;

    let version = obj
        .get("format_version")
        .and_then(Value::as_str)
        .ok_or_else(|| corrupt("missing format_version"))?;
    if version != FORMAT_VERSION {
        return Err(ModelIoError::UnsupportedVersion(version.into()));
    }
    let declared = obj
        .get("kind")
        .and_then(Value::as_str)
        .ok_or_else(|| corrupt("missing kind"))?;
    let kind = kinds()
        .find(|k| k.as_str() == declared)
        .ok_or_else(|| corrupt(format!("unknown kind `{declared}`")))?;
    let parameters = obj
        .get("parameters")
        .ok_or_else(|| corrupt("missing parameters"))?;
    if body_as(kind, parameters).is_none() {
        if let Some(found) = kinds().find(|&k| k != kind && body_as(k, parameters).is_some()) {
            return Err(ModelIoError::KindMismatch {
                declared: declared.into(),
                found: found.as_str().into(),
            });
        }
        return Err(corrupt(format!(
            "parameters do not describe a {declared} model"
        )));
    }

    let model: ClassifierModel = serde_json::from_value(doc).map_err(|e| corrupt(e.to_string()))?;
    model.validate().map_err(|e| corrupt(e.to_string()))?;
    Ok(model)
}

/// Loads and insists on a particular kind.
pub fn load_model_expecting<R: Read>(
    source: R,
    expected: ModelKind,
) -> Result<ClassifierModel, ModelIoError> {
    let model = load_model(source)?;
    if model.kind() != expected {
        return Err(ModelIoError::KindMismatch {
            declared: model.kind().as_str().into(),
            found: expected.as_str().into(),
        });
    }
    Ok(model)
}

pub fn load_model_file(path: &Path) -> Result<ClassifierModel, ModelIoError> {
    load_model(File::open(path)?)
}
