//! Metadata aggregation, the policy-driven preservation engine, and
//! self-describing archival packages.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::Engine;
use crate::canon;
use crate::error::{Error, Result};
use crate::format::FormatId;
use crate::kap::{
    build_bag, BagFile, ContextRef, DerivativeRef, EventOutcome, EventType, MetadataDescriptor,
    PlannedAction, Policy, PolicyAction, SemanticBlock, TechnicalBlock, RO_CRATE_CONTEXT,
};
use crate::krr::Node;
use crate::prov::{ProvNode, Trace, AGENT_NAME};
use crate::store::Pid;

/// What executing a planned action did.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum ActionOutcome {
    Migrated { derived: Pid },
    Flagged,
    Replicated,
}

impl Engine {
    // -----------------------------------------------------------------
    // 360-degree descriptor
    // -----------------------------------------------------------------

    /// Aggregate technical, semantic, and contextual metadata plus the
    /// event trail for one asset.
    pub fn aggregate_metadata(&self, pid: &Pid) -> Result<MetadataDescriptor> {
        let asset = self.assets.get(pid)?;
        let bytes = self.blobs.read_raw(&asset.blob)?;
        let format = asset
            .format
            .clone()
            .unwrap_or_else(FormatId::octet_stream);

        // Knowledge-graph entities whose assertions cite this asset.
        let mut entities: BTreeSet<String> = BTreeSet::new();
        for assertion in self.kg.assertions() {
            if assertion.provenance.as_deref() == Some(pid.as_str()) {
                entities.insert(assertion.subject.clone());
                if let Node::Id(id) = &assertion.object {
                    if self.kg.entity(id).is_some() {
                        entities.insert(id.clone());
                    }
                }
            }
        }

        // Context one hop out from the asset's Dataset record(s).
        let mut contextual: BTreeSet<ContextRef> = BTreeSet::new();
        for dataset in self.context.with_attribute("pid", pid.as_str()) {
            for link in self.context.neighborhood(&dataset.id) {
                let other = if link.from == dataset.id { &link.to } else { &link.from };
                if let Some(entity) = self.context.entity(other) {
                    contextual.insert(ContextRef {
                        entity: entity.id.clone(),
                        kind: format!("{:?}", entity.kind),
                        role: link.role.clone(),
                    });
                }
            }
        }

        let derivatives: BTreeSet<DerivativeRef> = self
            .derivations
            .iter()
            .filter(|d| &d.source == pid)
            .filter_map(|d| {
                self.assets.get(&d.derived).ok().map(|a| DerivativeRef {
                    pid: a.pid.clone(),
                    format: a
                        .format
                        .clone()
                        .unwrap_or_else(FormatId::octet_stream)
                        .to_string(),
                })
            })
            .collect();

        Ok(MetadataDescriptor {
            pid: pid.clone(),
            technical: TechnicalBlock {
                format: format.to_string(),
                format_risk: self.formats.risk_of(&format),
                size: bytes.len() as u64,
                digest: asset.blob.as_str().to_string(),
                stage: asset.stage.to_string(),
            },
            semantic: SemanticBlock {
                entities: entities.into_iter().collect(),
                concepts: self.annotations.concepts_of(pid),
            },
            contextual: contextual.into_iter().collect(),
            events: self.events.events_for(pid).iter().map(|e| e.id).collect(),
            derivatives: derivatives.into_iter().collect(),
        })
    }

    // -----------------------------------------------------------------
    // Policy engine
    // -----------------------------------------------------------------

    /// Evaluate every policy against every asset's flattened descriptor.
    ///
    /// Migrate plans are suppressed when a derivative in the target
    /// format already exists. Plans come out ordered by (pid, policy id).
    pub fn evaluate_policies(&self, policies: &[Policy]) -> Result<Vec<PlannedAction>> {
        for p in policies {
            p.validate(&self.registry)?;
        }
        let mut assets: Vec<&Pid> = self.assets.all().iter().map(|a| &a.pid).collect();
        assets.sort();
        let mut sorted: Vec<&Policy> = policies.iter().collect();
        sorted.sort_by(|a, b| a.id.cmp(&b.id));

        let mut plans = Vec::new();
        for pid in assets {
            let descriptor = self.aggregate_metadata(pid)?;
            let fields = descriptor.flatten();
            for policy in &sorted {
                if !policy.matches(&fields) {
                    continue;
                }
                if let PolicyAction::Migrate { target, .. } = &policy.action {
                    let exists = descriptor
                        .derivatives
                        .iter()
                        .any(|d| &d.format == target);
                    if exists {
                        continue; // non-superseded derivative present
                    }
                }
                plans.push(PlannedAction {
                    pid: pid.clone(),
                    policy_id: policy.id.clone(),
                    action: policy.action.clone(),
                });
            }
        }
        Ok(plans)
    }

    /// Execute one planned action.
    pub fn execute_action(&mut self, plan: &PlannedAction) -> Result<ActionOutcome> {
        self.writable()?;
        self.assets.get(&plan.pid)?;
        match &plan.action {
            PolicyAction::Migrate { target, migrator_id } => {
                let target = FormatId::new(target.clone());
                let derived =
                    self.run_migration(&plan.pid, &target, migrator_id, &plan.policy_id)?;
                Ok(ActionOutcome::Migrated { derived })
            }
            PolicyAction::Flag { reason } => {
                self.events.record(
                    &plan.pid,
                    EventType::Validation,
                    EventOutcome::Success,
                    AGENT_NAME,
                    &format!("flagged by policy {}: {reason}", plan.policy_id),
                )?;
                Ok(ActionOutcome::Flagged)
            }
            PolicyAction::Replicate {} => {
                let blob = self.assets.get(&plan.pid)?.blob.clone();
                self.blobs.replicate(&blob)?;
                self.events.record(
                    &plan.pid,
                    EventType::Validation,
                    EventOutcome::Success,
                    AGENT_NAME,
                    &format!("replica written by policy {}", plan.policy_id),
                )?;
                Ok(ActionOutcome::Replicated)
            }
        }
    }

    /// Evaluate and execute until no policy plans anything. Returns all
    /// executed outcomes. Bounded by assets x policies rounds.
    pub fn run_policies(&mut self, policies: &[Policy]) -> Result<Vec<(PlannedAction, ActionOutcome)>> {
        let mut executed = Vec::new();
        let bound = (self.assets.all().len() * policies.len()).max(1);
        for _ in 0..bound {
            let plans = self.evaluate_policies(policies)?;
            if plans.is_empty() {
                return Ok(executed);
            }
            for plan in plans {
                let outcome = self.execute_action(&plan)?;
                executed.push((plan, outcome));
            }
        }
        let remaining = self.evaluate_policies(policies)?;
        if remaining.is_empty() {
            Ok(executed)
        } else {
            Err(Error::Invalid(
                "policy engine did not reach a fixpoint; repeated plans persist".into(),
            ))
        }
    }

    // -----------------------------------------------------------------
    // Archival packages
    // -----------------------------------------------------------------

    /// The pid set an AIP covers: the asset plus its transitive
    /// derivatives.
    pub fn pid_set(&self, pid: &Pid) -> Result<Vec<Pid>> {
        self.assets.get(pid)?;
        let mut set: BTreeSet<Pid> = BTreeSet::new();
        let mut queue = vec![pid.clone()];
        while let Some(p) = queue.pop() {
            if !set.insert(p.clone()) {
                continue;
            }
            for d in self.derivations.iter().filter(|d| d.source == p) {
                queue.push(d.derived.clone());
            }
        }
        Ok(set.into_iter().collect())
    }

    /// Build the deterministic archival package for an asset.
    ///
    /// Payload: the asset's blob plus every derivative blob, named by
    /// digest. Metadata: the RO-Crate-style descriptor, the merged
    /// provenance trace of the pid set, and all preservation events.
    /// `include_kb` adds the knowledge-base snapshot (the Designated
    /// Community Knowledge Base) under `metadata/kb/`.
    pub fn build_aip(&self, pid: &Pid, include_kb: bool) -> Result<Vec<u8>> {
        let members = self.pid_set(pid)?;
        let mut files: Vec<BagFile> = Vec::new();

        let mut seen_blobs = BTreeSet::new();
        for member in &members {
            let asset = self.assets.get(member)?;
            if seen_blobs.insert(asset.blob.clone()) {
                files.push(BagFile {
                    path: format!("payload/{}", asset.blob),
                    bytes: self.blobs.get_blob(&asset.blob)?,
                });
            }
        }

        let descriptor = self.aggregate_metadata(pid)?;
        let mut descriptor_value = serde_json::to_value(&descriptor)?;
        let obj = descriptor_value
            .as_object_mut()
            .expect("descriptor serializes to an object");
        obj.insert("@context".into(), serde_json::json!(RO_CRATE_CONTEXT));
        obj.insert("@id".into(), serde_json::json!(pid.as_str()));
        obj.insert("@type".into(), serde_json::json!("Dataset"));
        // premis.json is the bag's event record; keeping ids here too
        // would make every new event rewrite the descriptor.
        obj.remove("events");
        files.push(BagFile {
            path: "metadata/descriptor.json".into(),
            bytes: canon::to_canonical_json_line(&descriptor_value)?.into_bytes(),
        });

        let trace = self.merged_trace(pid, &members)?;
        files.push(BagFile {
            path: "metadata/trace.json".into(),
            bytes: canon::to_canonical_json_line(&trace)?.into_bytes(),
        });

        let mut events: Vec<&crate::kap::PreservationEvent> = members
            .iter()
            .flat_map(|m| self.events.events_for(m))
            .collect();
        events.sort_by_key(|e| e.id);
        files.push(BagFile {
            path: "metadata/premis.json".into(),
            bytes: canon::to_canonical_json_line(&events)?.into_bytes(),
        });

        if include_kb {
            for (name, json) in [
                ("ontology.json", canon::to_canonical_json_line(&self.ontology)?),
                ("taxonomy.json", canon::to_canonical_json_line(&self.taxonomy)?),
                ("rules.json", canon::to_canonical_json_line(&self.rules)?),
                ("graph.json", canon::to_canonical_json_line(&self.kg.to_persisted())?),
                ("annotations.json", canon::to_canonical_json_line(&self.annotations)?),
            ] {
                files.push(BagFile {
                    path: format!("metadata/kb/{name}"),
                    bytes: json.into_bytes(),
                });
            }
        }

        // Bagging-Date from the newest event, not the wall clock, so
        // equal state yields equal bytes.
        let bagging_date = events
            .last()
            .map(|e| e.occurred_at[..10].to_string())
            .unwrap_or_else(|| "1970-01-01".to_string());

        Ok(build_bag(pid.as_str(), &bagging_date, &files))
    }

    /// Union of the derivation closures of every member, deduplicated by
    /// node id.
    fn merged_trace(&self, pid: &Pid, members: &[Pid]) -> Result<Trace> {
        let mut nodes: BTreeMap<String, ProvNode> = BTreeMap::new();
        let mut edges = Vec::new();
        for member in members {
            let t = self.get_trace(member)?;
            for n in t.nodes {
                nodes.entry(n.id.clone()).or_insert(n);
            }
            for e in t.edges {
                if !edges.contains(&e) {
                    edges.push(e);
                }
            }
        }
        edges.sort_by(|a, b| (&a.from, &a.to).cmp(&(&b.from, &b.to)));
        let trace = Trace {
            id: format!("aip:{pid}"),
            nodes: nodes.into_values().collect(),
            edges,
        };
        trace.validate()?;
        Ok(trace)
    }
}
