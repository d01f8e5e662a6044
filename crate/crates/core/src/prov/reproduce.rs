//! The reproduction service: re-execute a captured trace and compare
//! digests.
//!
//! The trace is the blueprint: pinned operation versions, verbatim
//! parameters, and the input wiring. Timestamps are ignored; only content
//! digests are compared. Downstream steps consume the regenerated bytes,
//! so a divergence shows up at the first step that produced it.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::registry::OperationRegistry;
use super::trace::{NodeKind, ProvNode, Trace};
use crate::error::{Error, Result};
use crate::store::BlobId;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StepComparison {
    pub step: String,
    pub output: String,
    pub recorded: String,
    pub reproduced: String,
    pub equal: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReproductionReport {
    pub pid: String,
    #[serde(rename = "match")]
    pub matched: bool,
    /// Per-output comparisons in execution order.
    pub comparisons: Vec<StepComparison>,
}

impl ReproductionReport {
    /// The first step whose digest diverged, if any.
    pub fn first_divergence(&self) -> Option<&StepComparison> {
        self.comparisons.iter().find(|c| !c.equal)
    }
}

/// Re-execute every activity in the trace in dependency order inside a
/// fresh in-memory workspace and compare all regenerated output digests
/// against the recorded ones.
pub fn reproduce_trace(
    trace: &Trace,
    registry: &OperationRegistry,
    resolve_blob: &dyn Fn(&BlobId) -> Result<Vec<u8>>,
    result_pid: &str,
) -> Result<ReproductionReport> {
    trace.validate()?;
    let activities = ordered_activities(trace)?;

    for a in &activities {
        let (op, version) = op_of(a)?;
        if !registry.contains(op, version) {
            return Err(Error::MissingOperationVersion(format!("{op}@{version}")));
        }
    }

    let mut workspace: BTreeMap<String, Vec<u8>> = BTreeMap::new();
    let mut comparisons = Vec::new();

    if activities.is_empty() {
        // Ingest-only trace: verify the entity's blob is still intact.
        if let Some(entity) = trace.entity_by_pid(result_pid) {
            if let Some(recorded) = entity.attr_str("blob") {
                let blob_id = BlobId::parse(recorded)?;
                let bytes = fetch_external(&blob_id, resolve_blob)?;
                let reproduced = BlobId::of(&bytes);
                comparisons.push(StepComparison {
                    step: "(external)".into(),
                    output: result_pid.to_string(),
                    recorded: recorded.to_string(),
                    reproduced: reproduced.as_str().to_string(),
                    equal: reproduced.as_str() == recorded,
                });
            }
        }
    }

    for activity in &activities {
        let step_name = activity.attr_str("step").unwrap_or(&activity.id).to_string();
        let (op, version) = op_of(activity)?;
        let parameters = activity
            .attrs
            .get("parameters")
            .cloned()
            .unwrap_or(serde_json::Value::Null);

        let mut inputs: BTreeMap<String, Vec<u8>> = BTreeMap::new();
        for (name, entity_id) in name_map(activity, "inputs")? {
            let bytes = match workspace.get(&entity_id) {
                Some(bytes) => bytes.clone(),
                None => {
                    let node = trace
                        .node(&entity_id)
                        .ok_or_else(|| Error::Invalid(format!("trace lacks entity {entity_id}")))?;
                    let digest = node.attr_str("blob").ok_or_else(|| {
                        Error::Invalid(format!("entity {entity_id} lacks a blob digest"))
                    })?;
                    let bytes = fetch_external(&BlobId::parse(digest)?, resolve_blob)?;
                    workspace.insert(entity_id.clone(), bytes.clone());
                    bytes
                }
            };
            inputs.insert(name, bytes);
        }

        let outputs = registry.run(op, version, &inputs, &parameters)?;

        for (name, entity_id) in name_map(activity, "outputs")? {
            let recorded = trace
                .node(&entity_id)
                .and_then(|n| n.attr_str("blob"))
                .unwrap_or("")
                .to_string();
            match outputs.get(&name) {
                Some(bytes) => {
                    let reproduced = BlobId::of(bytes);
                    comparisons.push(StepComparison {
                        step: step_name.clone(),
                        output: name.clone(),
                        equal: reproduced.as_str() == recorded,
                        reproduced: reproduced.as_str().to_string(),
                        recorded,
                    });
                    workspace.insert(entity_id, bytes.clone());
                }
                None => comparisons.push(StepComparison {
                    step: step_name.clone(),
                    output: name.clone(),
                    recorded,
                    reproduced: "(not produced)".into(),
                    equal: false,
                }),
            }
        }
    }

    let matched = comparisons.iter().all(|c| c.equal);
    Ok(ReproductionReport {
        pid: result_pid.to_string(),
        matched,
        comparisons,
    })
}

fn fetch_external(id: &BlobId, resolve: &dyn Fn(&BlobId) -> Result<Vec<u8>>) -> Result<Vec<u8>> {
    resolve(id).map_err(|e| match e {
        Error::NotFound(_) => Error::MissingInputBlob(id.as_str().to_string()),
        other => other,
    })
}

fn op_of(activity: &ProvNode) -> Result<(&str, &str)> {
    let op = activity
        .attr_str("operation_id")
        .ok_or_else(|| Error::Invalid(format!("activity {} lacks operation_id", activity.id)))?;
    let version = activity
        .attr_str("operation_version")
        .ok_or_else(|| Error::Invalid(format!("activity {} lacks operation_version", activity.id)))?;
    Ok((op, version))
}

fn name_map(activity: &ProvNode, key: &str) -> Result<BTreeMap<String, String>> {
    let Some(value) = activity.attrs.get(key) else {
        return Ok(BTreeMap::new());
    };
    let obj = value
        .as_object()
        .ok_or_else(|| Error::Invalid(format!("activity {} attr {key} must be an object", activity.id)))?;
    obj.iter()
        .map(|(k, v)| {
            v.as_str()
                .map(|s| (k.clone(), s.to_string()))
                .ok_or_else(|| Error::Invalid(format!("{key} entry {k} must name an entity")))
        })
        .collect()
}

/// Activities in dependency order: an activity runs after every activity
/// that generated one of its inputs. Deterministic by activity id.
fn ordered_activities(trace: &Trace) -> Result<Vec<&ProvNode>> {
    let mut order: Vec<&ProvNode> = Vec::new();
    let mut done: std::collections::BTreeSet<&str> = std::collections::BTreeSet::new();
    let mut open: std::collections::BTreeSet<&str> = std::collections::BTreeSet::new();

    let mut ids: Vec<&str> = trace
        .nodes
        .iter()
        .filter(|n| n.kind == NodeKind::Activity)
        .map(|n| n.id.as_str())
        .collect();
    ids.sort_unstable();

    fn visit<'a>(
        trace: &'a Trace,
        id: &'a str,
        done: &mut std::collections::BTreeSet<&'a str>,
        open: &mut std::collections::BTreeSet<&'a str>,
        order: &mut Vec<&'a ProvNode>,
    ) -> Result<()> {
        if done.contains(id) {
            return Ok(());
        }
        if !open.insert(id) {
            return Err(Error::Cycle(format!("activity dependency cycle through {id}")));
        }
        for entity in trace.used_by(id) {
            if let Some(upstream) = trace.generator_of(entity) {
                visit(trace, upstream, done, open, order)?;
            }
        }
        open.remove(id);
        done.insert(id);
        order.push(trace.node(id).expect("activity exists"));
        Ok(())
    }

    for id in ids {
        visit(trace, id, &mut done, &mut open, &mut order)?;
    }
    Ok(order)
}
