//! Instrumented pipeline execution: every run emits a validated PROV
//! trace, persisted before the outputs are reported.

use std::collections::BTreeMap;
use std::fs;

use serde::{Deserialize, Serialize};

use super::{Derivation, Engine};
use crate::canon;
use crate::error::{Error, Result};
use crate::kap::{EventOutcome, EventType};
use crate::prov::{
    reproduce_trace, EdgeKind, NodeKind, PipelineSpec, ProvEdge, ProvNode, ReproductionReport,
    StepInput, Trace, AGENT_NAME, AGENT_VERSION,
};
use crate::store::{BlobId, Pid};

const AGENT_NODE: &str = "agent:ikmf-engine";

/// Outputs of one pipeline run, keyed `<step>.<output>`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PipelineRun {
    pub trace_id: String,
    pub outputs: BTreeMap<String, Pid>,
}

impl Engine {
    /// Execute a pipeline DAG.
    ///
    /// Steps run in topological order; each output is stored as a new
    /// asset (fresh pid, deduplicated blob) and every step emits its
    /// activity, used/wasGeneratedBy/wasAssociatedWith edges, and
    /// wasDerivedFrom links to its inputs. The trace persists before the
    /// outputs are reported.
    pub fn run_pipeline(
        &mut self,
        spec: &PipelineSpec,
        arguments: &BTreeMap<String, Pid>,
    ) -> Result<PipelineRun> {
        self.writable()?;
        let spec = Self::resolve_spec(spec, arguments)?;
        spec.validate(&self.registry)?;
        let order = spec.topological_order()?;
        let trace_id = fresh_trace_id();

        let mut nodes: Vec<ProvNode> = vec![ProvNode {
            id: AGENT_NODE.into(),
            kind: NodeKind::Agent,
            attrs: BTreeMap::from([
                ("name".to_string(), serde_json::json!(AGENT_NAME)),
                ("version".to_string(), serde_json::json!(AGENT_VERSION)),
            ]),
        }];
        let mut edges: Vec<ProvEdge> = Vec::new();
        let mut entity_nodes: BTreeMap<Pid, String> = BTreeMap::new();

        // Bytes and producing activity per step output.
        let mut step_outputs: BTreeMap<(String, String), (Vec<u8>, Pid)> = BTreeMap::new();
        let mut step_activity: BTreeMap<String, String> = BTreeMap::new();
        let mut outputs: BTreeMap<String, Pid> = BTreeMap::new();
        let mut derivations: Vec<Derivation> = Vec::new();

        for step_name in order {
            let step = &spec.steps[step_name];
            let activity_id = format!("act:{trace_id}:{step_name}");

            let mut input_bytes: BTreeMap<String, Vec<u8>> = BTreeMap::new();
            let mut input_entities: BTreeMap<String, String> = BTreeMap::new();
            let mut informed_by: Vec<String> = Vec::new();

            for (input_name, source) in &step.inputs {
                let (bytes, entity_id) = match source {
                    StepInput::External { pid } => {
                        let pid = Pid::parse(pid)?;
                        let entity_id = self.ensure_entity_node(
                            &pid,
                            &mut nodes,
                            &mut entity_nodes,
                        )?;
                        let asset = self.assets.get(&pid)?;
                        (self.blobs.get_blob(&asset.blob)?, entity_id)
                    }
                    StepInput::Step { step: upstream, output } => {
                        let key = (upstream.clone(), output.clone());
                        let (bytes, pid) = step_outputs.get(&key).ok_or_else(|| {
                            Error::MissingInput(format!("{upstream}.{output} (read by {step_name})"))
                        })?;
                        informed_by.push(step_activity[upstream].clone());
                        (bytes.clone(), entity_nodes[pid].clone())
                    }
                };
                input_bytes.insert(input_name.clone(), bytes);
                input_entities.insert(input_name.clone(), entity_id);
            }

            let started = canon::now_rfc3339();
            let produced = self
                .registry
                .run(
                    &step.operation_id,
                    &step.operation_version,
                    &input_bytes,
                    &step.parameters,
                )
                .map_err(|e| match e {
                    Error::StepFailure { message, .. } => Error::StepFailure {
                        step: step_name.to_string(),
                        message,
                    },
                    other => other,
                })?;
            let ended = canon::now_rfc3339();

            let mut output_entities: BTreeMap<String, String> = BTreeMap::new();
            for (output_name, bytes) in &produced {
                let blob = self.blobs.put_blob(bytes)?;
                let format = self.identify_format(bytes);
                let asset = self.assets.register(
                    blob.clone(),
                    Some(format),
                    &format!("pipeline:{trace_id}:{step_name}.{output_name}"),
                )?;
                let entity_id = format!("e:{}", asset.pid);
                nodes.push(entity_node(&entity_id, &asset.pid, &blob));
                entity_nodes.insert(asset.pid.clone(), entity_id.clone());
                edges.push(ProvEdge {
                    kind: EdgeKind::WasGeneratedBy,
                    from: entity_id.clone(),
                    to: activity_id.clone(),
                });
                for upstream_entity in input_entities.values() {
                    edges.push(ProvEdge {
                        kind: EdgeKind::WasDerivedFrom,
                        from: entity_id.clone(),
                        to: upstream_entity.clone(),
                    });
                }
                for source in inputs_to_pids(&input_entities, &entity_nodes) {
                    derivations.push(Derivation {
                        source,
                        derived: asset.pid.clone(),
                        trace: trace_id.clone(),
                    });
                }
                output_entities.insert(output_name.clone(), entity_id);
                step_outputs.insert(
                    (step_name.to_string(), output_name.clone()),
                    (bytes.clone(), asset.pid.clone()),
                );
                outputs.insert(format!("{step_name}.{output_name}"), asset.pid.clone());
            }

            for input_entity in input_entities.values() {
                edges.push(ProvEdge {
                    kind: EdgeKind::Used,
                    from: activity_id.clone(),
                    to: input_entity.clone(),
                });
            }
            edges.push(ProvEdge {
                kind: EdgeKind::WasAssociatedWith,
                from: activity_id.clone(),
                to: AGENT_NODE.into(),
            });
            informed_by.sort();
            informed_by.dedup();
            for upstream in informed_by {
                edges.push(ProvEdge {
                    kind: EdgeKind::WasInformedBy,
                    from: activity_id.clone(),
                    to: upstream,
                });
            }

            nodes.push(ProvNode {
                id: activity_id.clone(),
                kind: NodeKind::Activity,
                attrs: BTreeMap::from([
                    ("step".to_string(), serde_json::json!(step_name)),
                    ("operation_id".to_string(), serde_json::json!(step.operation_id)),
                    (
                        "operation_version".to_string(),
                        serde_json::json!(step.operation_version),
                    ),
                    ("parameters".to_string(), step.parameters.clone()),
                    ("inputs".to_string(), serde_json::json!(input_entities)),
                    ("outputs".to_string(), serde_json::json!(output_entities)),
                    ("started".to_string(), serde_json::json!(started)),
                    ("ended".to_string(), serde_json::json!(ended)),
                ]),
            });
            step_activity.insert(step_name.to_string(), activity_id);
        }

        let trace = Trace {
            id: trace_id.clone(),
            nodes,
            edges,
        };
        trace.validate()?;
        self.persist_trace(&trace)?;
        for pid in outputs.values() {
            self.trace_index.insert(pid.clone(), trace_id.clone());
        }
        self.persist_trace_index()?;
        self.derivations.extend(derivations);
        self.persist_derivations()?;
        Ok(PipelineRun { trace_id, outputs })
    }

    /// Bind `argument` placeholders in a spec to concrete pids.
    pub fn resolve_spec(
        spec: &PipelineSpec,
        arguments: &BTreeMap<String, Pid>,
    ) -> Result<PipelineSpec> {
        let mut resolved = spec.clone();
        for step in resolved.steps.values_mut() {
            for input in step.inputs.values_mut() {
                if let StepInput::External { pid } = input {
                    if let Some(name) = pid.strip_prefix('$') {
                        let bound = arguments.get(name).ok_or_else(|| {
                            Error::MissingInput(format!("pipeline argument ${name}"))
                        })?;
                        *pid = bound.to_string();
                    }
                }
            }
        }
        Ok(resolved)
    }

    fn ensure_entity_node(
        &self,
        pid: &Pid,
        nodes: &mut Vec<ProvNode>,
        entity_nodes: &mut BTreeMap<Pid, String>,
    ) -> Result<String> {
        if let Some(id) = entity_nodes.get(pid) {
            return Ok(id.clone());
        }
        let asset = self.assets.get(pid)?;
        let entity_id = format!("e:{pid}");
        nodes.push(entity_node(&entity_id, pid, &asset.blob));
        entity_nodes.insert(pid.clone(), entity_id.clone());
        Ok(entity_id)
    }

    fn persist_trace(&self, trace: &Trace) -> Result<()> {
        let dir = self.root().join("prov");
        fs::create_dir_all(&dir)?;
        fs::write(
            dir.join(format!("{}.json", trace.id)),
            canon::to_canonical_json_line(trace)?,
        )?;
        Ok(())
    }

    fn persist_trace_index(&self) -> Result<()> {
        let dir = self.root().join("prov");
        fs::create_dir_all(&dir)?;
        fs::write(
            dir.join("index.json"),
            canon::to_canonical_json_line(&self.trace_index)?,
        )?;
        Ok(())
    }

    pub fn load_trace(&self, trace_id: &str) -> Result<Trace> {
        let path = self.root().join("prov").join(format!("{trace_id}.json"));
        if !path.exists() {
            return Err(Error::NotFound(format!("trace {trace_id}")));
        }
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }

    /// The derivation closure of an asset, back to external inputs. For
    /// an ingested asset that no pipeline produced, the trace is its
    /// entity node alone.
    pub fn get_trace(&self, pid: &Pid) -> Result<Trace> {
        match self.trace_index.get(pid) {
            Some(trace_id) => {
                let trace = self.load_trace(trace_id)?;
                trace.derivation_closure(&format!("e:{pid}"))
            }
            None => {
                let asset = self.assets.get(pid)?;
                Ok(Trace {
                    id: format!("ingest:{pid}"),
                    nodes: vec![entity_node(&format!("e:{pid}"), pid, &asset.blob)],
                    edges: vec![],
                })
            }
        }
    }

    /// Re-execute the captured trace of a result and compare digests.
    pub fn reproduce(&self, pid: &Pid) -> Result<ReproductionReport> {
        let trace = self.get_trace(pid)?;
        self.reproduce_from_trace(&trace, pid)
    }

    /// Reproduce from an explicit trace (e.g. one copied out of an AIP).
    pub fn reproduce_from_trace(&self, trace: &Trace, pid: &Pid) -> Result<ReproductionReport> {
        let resolve = |id: &BlobId| self.blobs.get_blob(id);
        reproduce_trace(trace, &self.registry, &resolve, pid.as_str())
    }

    /// Run a migration step as an instrumented single-step pipeline and
    /// record migration events on both pids.
    pub(crate) fn run_migration(
        &mut self,
        pid: &Pid,
        target: &crate::format::FormatId,
        migrator_id: &str,
        policy_id: &str,
    ) -> Result<Pid> {
        let version = self
            .latest_version(migrator_id)
            .ok_or_else(|| Error::UnregisteredOperation(migrator_id.to_string()))?;
        let spec = PipelineSpec {
            steps: BTreeMap::from([(
                "migrate".to_string(),
                crate::prov::StepSpec {
                    operation_id: migrator_id.to_string(),
                    operation_version: version,
                    parameters: serde_json::json!({
                        "policy": policy_id,
                        "target": target.as_str(),
                    }),
                    inputs: BTreeMap::from([(
                        "source".to_string(),
                        StepInput::External { pid: pid.to_string() },
                    )]),
                },
            )]),
        };
        let run = match self.run_pipeline(&spec, &BTreeMap::new()) {
            Ok(run) => run,
            Err(e) => {
                self.events.record(
                    pid,
                    EventType::Migration,
                    EventOutcome::Failure,
                    AGENT_NAME,
                    &format!("policy {policy_id}: {e}"),
                )?;
                return Err(Error::MigratorFailure(e.to_string()));
            }
        };
        let derived = run
            .outputs
            .get("migrate.migrated")
            .cloned()
            .ok_or_else(|| Error::MigratorFailure("migrator produced no 'migrated' output".into()))?;
        self.assets.set_format(&derived, target.clone())?;
        let detail = format!("policy {policy_id}: {pid} -> {derived} ({target})");
        self.events.record(pid, EventType::Migration, EventOutcome::Success, AGENT_NAME, &detail)?;
        self.events.record(&derived, EventType::Migration, EventOutcome::Success, AGENT_NAME, &detail)?;
        Ok(derived)
    }
}

fn entity_node(entity_id: &str, pid: &Pid, blob: &BlobId) -> ProvNode {
    ProvNode {
        id: entity_id.to_string(),
        kind: NodeKind::Entity,
        attrs: BTreeMap::from([
            ("pid".to_string(), serde_json::json!(pid.as_str())),
            ("blob".to_string(), serde_json::json!(blob.as_str())),
        ]),
    }
}

fn inputs_to_pids(
    input_entities: &BTreeMap<String, String>,
    entity_nodes: &BTreeMap<Pid, String>,
) -> Vec<Pid> {
    let mut pids: Vec<Pid> = entity_nodes
        .iter()
        .filter(|(_, node)| input_entities.values().any(|v| v == *node))
        .map(|(pid, _)| pid.clone())
        .collect();
    pids.sort();
    pids.dedup();
    pids
}

fn fresh_trace_id() -> String {
    let raw: [u8; 16] = rand::random();
    format!("run-{}", hex::encode(raw))
}
