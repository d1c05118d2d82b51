//! Canonical JSON form of a model: sorted keys, two-space indent, LF.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{Decomposition, Invariant, IrmModel, JournalRef, ModelComponent, ModelError};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Document {
    schema_version: u32,
    components: Vec<ModelComponent>,
    invariants: Vec<Invariant>,
    decompositions: Vec<Decomposition>,
    traces: std::collections::BTreeMap<String, Vec<u32>>,
    journal_ref: JournalRef,
}

/// Canonical bytes: serializing the same model twice gives identical text.
pub fn serialize(model: &IrmModel) -> String {
    let doc = Document {
        schema_version: SCHEMA_VERSION,
        components: model.components.clone(),
        invariants: model.invariants.clone(),
        decompositions: model.decompositions.clone(),
        traces: model.traces.clone(),
        journal_ref: model.journal_ref.clone(),
    };
    canonical_json(&doc)
}

/// Sorted keys (serde_json maps are ordered), two-space indent, final LF.
pub fn canonical_json<T: Serialize>(value: &T) -> String {
    let value: Value = serde_json::to_value(value).expect("model types serialize");
    let mut text = serde_json::to_string_pretty(&value).expect("values serialize");
    text.push('\n');
    text
}

/// Reads and checks a model document.
pub fn deserialize(text: &str) -> Result<IrmModel, ModelError> {
    let value: Value = serde_json::from_str(text).map_err(|e| ModelError::SchemaViolation { path: "$".into(), reason: e.to_string() })?;
    let version = value.get("schema_version").and_then(Value::as_u64);
    if version != Some(SCHEMA_VERSION as u64) {
        return Err(ModelError::SchemaViolation { path: "$.schema_version".into(), reason: format!("expected {SCHEMA_VERSION}") });
    }
    let doc: Document =
        serde_json::from_value(value).map_err(|e| ModelError::SchemaViolation { path: "$".into(), reason: e.to_string() })?;
    let model = IrmModel {
        components: doc.components,
        invariants: doc.invariants,
        decompositions: doc.decompositions,
        traces: doc.traces,
        journal_ref: doc.journal_ref,
    };
    model.check()?;
    if model.traces != model.trace_table() {
        return Err(ModelError::SchemaViolation { path: "$.traces".into(), reason: "does not match invariant traces".into() });
    }
    Ok(model)
}
