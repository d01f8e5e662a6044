//! Builtin pipeline operations.
//!
//! Every operation is a pure function from named input byte streams plus
//! canonical-JSON parameters to named output byte streams; the knowledge
//! base and index never change inside an operation, so a recorded trace
//! replays exactly. Gazetteers and patterns travel in the parameters and
//! are therefore captured in full by the trace.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde_json::Value;

use crate::canon;
use crate::content::{ContentRecord, IndexContribution};
use crate::error::Result;
use crate::format::FormatId;
use crate::kea::{
    extract_attributes, extract_entities, extract_relations, extract_table_facts,
    fuse_candidates, AttributeMention, Gazetteer, Mention, PatternSet,
};
use crate::prov::{OperationFn, OperationRegistry};
use crate::store::Pid;

pub const EXTRACT_CONTENT: &str = "extract_content";
pub const INDEX_DOCUMENT: &str = "index_document";
pub const EXTRACT_ENTITIES: &str = "extract_entities";
pub const EXTRACT_ATTRIBUTES: &str = "extract_attributes";
pub const EXTRACT_RELATIONS: &str = "extract_relations";
pub const EXTRACT_TABLE_FACTS: &str = "extract_table_facts";
pub const FUSE_CANDIDATES: &str = "fuse_candidates";
pub const BUILTIN_VERSION: &str = "1.0.0";

pub fn register_builtin_operations(registry: &mut OperationRegistry) -> Result<()> {
    registry.register(EXTRACT_CONTENT, BUILTIN_VERSION, extract_content_op())?;
    registry.register(INDEX_DOCUMENT, BUILTIN_VERSION, index_document_op())?;
    registry.register(EXTRACT_ENTITIES, BUILTIN_VERSION, extract_entities_op())?;
    registry.register(EXTRACT_ATTRIBUTES, BUILTIN_VERSION, extract_attributes_op())?;
    registry.register(EXTRACT_RELATIONS, BUILTIN_VERSION, extract_relations_op())?;
    registry.register(EXTRACT_TABLE_FACTS, BUILTIN_VERSION, extract_table_facts_op())?;
    registry.register(FUSE_CANDIDATES, BUILTIN_VERSION, fuse_candidates_op())?;
    Ok(())
}

type OpResult = std::result::Result<BTreeMap<String, Vec<u8>>, String>;

fn single(name: &str, value: impl serde::Serialize) -> OpResult {
    let json = canon::to_canonical_json(&value).map_err(|e| e.to_string())?;
    Ok(BTreeMap::from([(name.to_string(), json.into_bytes())]))
}

fn input<'a>(inputs: &'a BTreeMap<String, Vec<u8>>, name: &str) -> std::result::Result<&'a [u8], String> {
    inputs
        .get(name)
        .map(Vec::as_slice)
        .ok_or_else(|| format!("missing input '{name}'"))
}

fn parse<T: serde::de::DeserializeOwned>(bytes: &[u8], what: &str) -> std::result::Result<T, String> {
    serde_json::from_slice(bytes).map_err(|e| format!("malformed {what}: {e}"))
}

fn param<T: serde::de::DeserializeOwned>(params: &Value, key: &str) -> std::result::Result<T, String> {
    let v = params
        .get(key)
        .ok_or_else(|| format!("missing parameter '{key}'"))?;
    serde_json::from_value(v.clone()).map_err(|e| format!("parameter '{key}': {e}"))
}

/// `source` bytes -> `record` (parameters: pid, format).
fn extract_content_op() -> OperationFn {
    Arc::new(|inputs, params| {
        let source = input(inputs, "source")?;
        let pid: String = param(params, "pid")?;
        let pid = Pid::parse(&pid).map_err(|e| e.to_string())?;
        let format: String = param(params, "format")?;
        let record = crate::content::extract_content(&pid, &FormatId::new(format), source)
            .map_err(|e| e.to_string())?;
        single("record", record)
    })
}

/// `record` -> `contribution` (postings update the engine applies).
fn index_document_op() -> OperationFn {
    Arc::new(|inputs, _params| {
        let record: ContentRecord = parse(input(inputs, "record")?, "record")?;
        single("contribution", IndexContribution::from_record(&record))
    })
}

/// `record` -> `mentions` (parameters: gazetteer).
fn extract_entities_op() -> OperationFn {
    Arc::new(|inputs, params| {
        let record: ContentRecord = parse(input(inputs, "record")?, "record")?;
        let gazetteer: Gazetteer = param(params, "gazetteer")?;
        single("mentions", extract_entities(&record, &gazetteer))
    })
}

/// `record` -> `attributes`.
fn extract_attributes_op() -> OperationFn {
    Arc::new(|inputs, _params| {
        let record: ContentRecord = parse(input(inputs, "record")?, "record")?;
        single("attributes", extract_attributes(&record))
    })
}

/// `record` + `mentions` + `attributes` -> `relations` (parameters: patterns).
fn extract_relations_op() -> OperationFn {
    Arc::new(|inputs, params| {
        let record: ContentRecord = parse(input(inputs, "record")?, "record")?;
        let mentions: Vec<Mention> = parse(input(inputs, "mentions")?, "mentions")?;
        let attributes: Vec<AttributeMention> = parse(input(inputs, "attributes")?, "attributes")?;
        let patterns: PatternSet = param(params, "patterns")?;
        single(
            "relations",
            extract_relations(&record, &mentions, &attributes, &patterns.patterns),
        )
    })
}

/// `record` -> `relations` from table rows (parameters: gazetteer).
fn extract_table_facts_op() -> OperationFn {
    Arc::new(|inputs, params| {
        let record: ContentRecord = parse(input(inputs, "record")?, "record")?;
        let gazetteer: Gazetteer = param(params, "gazetteer")?;
        single("relations", extract_table_facts(&record, &gazetteer))
    })
}

/// Any number of mention-list inputs -> `fused` (parameters: honorifics).
/// Inputs concatenate in input-name order, so fusion over multiple
/// documents is deterministic.
fn fuse_candidates_op() -> OperationFn {
    Arc::new(|inputs, params| {
        let honorifics: Vec<String> = param(params, "honorifics")?;
        let mut mentions: Vec<Mention> = Vec::new();
        for (name, bytes) in inputs {
            let batch: Vec<Mention> = parse(bytes, &format!("mentions input {name}"))?;
            mentions.extend(batch);
        }
        single("fused", fuse_candidates(&mentions, &honorifics))
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Shipped operations must be deterministic: double execution on the
    /// same inputs yields identical bytes.
    #[test]
    fn doubled_execution_yields_identical_bytes() {
        let mut registry = OperationRegistry::new();
        register_builtin_operations(&mut registry).unwrap();
        crate::kap::migrate::register_builtin_migrators(&mut registry).unwrap();

        let pid = "ikmf:000000000000000000000000000000aa";
        let gaz = serde_json::json!({
            "honorifics": ["Dr."],
            "entries": [
                {"surface": "Smith", "label": "Smith", "class": "Person"},
                {"surface": "Project X", "label": "Project X", "class": "Project"}
            ]
        });
        let patterns = serde_json::json!({"patterns": [{
            "subject_class": "Person",
            "connective": "is principal investigator for",
            "object_class": "Project",
            "predicate": "isPrincipalInvestigatorFor"
        }]});

        let source = b"Dr. Smith is principal investigator for Project X since 2023-05-01.".to_vec();
        let record_params = serde_json::json!({"pid": pid, "format": "text/plain"});
        let record = registry
            .run(EXTRACT_CONTENT, BUILTIN_VERSION, &BTreeMap::from([("source".to_string(), source.clone())]), &record_params)
            .unwrap()["record"]
            .clone();
        let mentions = registry
            .run(
                EXTRACT_ENTITIES,
                BUILTIN_VERSION,
                &BTreeMap::from([("record".to_string(), record.clone())]),
                &serde_json::json!({"gazetteer": gaz}),
            )
            .unwrap()["mentions"]
            .clone();
        let attributes = registry
            .run(
                EXTRACT_ATTRIBUTES,
                BUILTIN_VERSION,
                &BTreeMap::from([("record".to_string(), record.clone())]),
                &Value::Null,
            )
            .unwrap()["attributes"]
            .clone();

        // (op, inputs, params) fixtures exercising every shipped operation.
        let cases: Vec<(&str, BTreeMap<String, Vec<u8>>, Value)> = vec![
            (
                EXTRACT_CONTENT,
                BTreeMap::from([("source".to_string(), source)]),
                record_params,
            ),
            (
                INDEX_DOCUMENT,
                BTreeMap::from([("record".to_string(), record.clone())]),
                Value::Null,
            ),
            (
                EXTRACT_ENTITIES,
                BTreeMap::from([("record".to_string(), record.clone())]),
                serde_json::json!({"gazetteer": gaz}),
            ),
            (
                EXTRACT_ATTRIBUTES,
                BTreeMap::from([("record".to_string(), record.clone())]),
                Value::Null,
            ),
            (
                EXTRACT_RELATIONS,
                BTreeMap::from([
                    ("record".to_string(), record.clone()),
                    ("mentions".to_string(), mentions.clone()),
                    ("attributes".to_string(), attributes),
                ]),
                serde_json::json!({"patterns": patterns}),
            ),
            (
                EXTRACT_TABLE_FACTS,
                BTreeMap::from([("record".to_string(), record)]),
                serde_json::json!({"gazetteer": gaz}),
            ),
            (
                FUSE_CANDIDATES,
                BTreeMap::from([("mentions:0".to_string(), mentions)]),
                serde_json::json!({"honorifics": ["Dr."]}),
            ),
            (
                crate::kap::migrate::CSV_TO_JSON,
                BTreeMap::from([("source".to_string(), b"a,b\n1,2\n".to_vec())]),
                Value::Null,
            ),
            (
                crate::kap::migrate::LATIN1_TO_UTF8,
                BTreeMap::from([("source".to_string(), vec![0x63, 0xE9])]),
                Value::Null,
            ),
        ];

        let mut exercised: Vec<&str> = cases.iter().map(|(op, _, _)| *op).collect();
        exercised.sort_unstable();
        exercised.dedup();
        let mut shipped: Vec<String> = registry.operations().into_iter().map(|(id, _)| id).collect();
        shipped.sort();
        shipped.dedup();
        assert_eq!(shipped, exercised, "every shipped operation needs a determinism fixture");

        for (op, inputs, params) in cases {
            let a = registry.run(op, BUILTIN_VERSION, &inputs, &params).unwrap();
            let b = registry.run(op, BUILTIN_VERSION, &inputs, &params).unwrap();
            assert_eq!(a, b, "operation {op} is not deterministic");
        }
    }
}
