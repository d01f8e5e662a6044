//! The standard mining pipeline: extract -> index -> entity/attribute/
//! relation extraction -> fusion, run as one provenance-instrumented
//! pipeline, followed by linking, assertion, annotation, and
//! materialization of the results.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::ops;
use super::Engine;
use crate::content::IndexContribution;
use crate::error::{Error, Result};
use crate::kap::{EventOutcome, EventType};
use crate::kea::{
    normalize_surface, AttributeValue, CandidateRelation, FusedCandidate, Gazetteer,
    PatternSet, RelationObject,
};
use crate::krr::{Datatype, Fact, KnowledgeGraph, LinkResult, Node, PropertyKind, PropertyRange};
use crate::prov::{PipelineSpec, StepInput, StepSpec, AGENT_NAME};
use crate::store::{Pid, Stage};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MineReport {
    pub trace_id: String,
    /// Pipeline outputs, keyed `<step>.<output>`.
    pub outputs: BTreeMap<String, Pid>,
    /// Link decision per fused candidate (label, class, result).
    pub links: Vec<(String, String, LinkResult)>,
    pub assertions_added: usize,
    pub inferred: usize,
    /// Relation candidates skipped because their predicate is not
    /// declared in the ontology (they stay candidates, not facts).
    pub skipped_predicates: Vec<String>,
    /// Candidates left to curation because linking was ambiguous.
    pub ambiguous: usize,
}

impl Engine {
    /// Mine one or more documents as a single instrumented run.
    ///
    /// Fusion spans all documents in the call, so a value appearing in
    /// one document's prose and another's table fuses into one candidate
    /// and links to one entity.
    pub fn mine(
        &mut self,
        pids: &[Pid],
        gazetteer: &Gazetteer,
        patterns: &PatternSet,
    ) -> Result<MineReport> {
        self.writable()?;
        if pids.is_empty() {
            return Err(Error::Invalid("mine needs at least one pid".into()));
        }
        for pid in pids {
            self.assets.get(pid)?;
        }

        let spec = self.mine_spec(pids, gazetteer, patterns)?;
        let run = self.run_pipeline(&spec, &BTreeMap::new())?;

        // Apply phase: index contributions, stage advances, events.
        let mut all_relations: Vec<CandidateRelation> = Vec::new();
        for (i, pid) in pids.iter().enumerate() {
            let contribution: IndexContribution =
                self.parse_output(&run.outputs, &format!("d{i}-index.contribution"))?;
            self.index.apply(contribution)?;
            self.assets.advance_stage(pid, Stage::Content)?;
            self.events.record(
                pid,
                EventType::Extraction,
                EventOutcome::Success,
                AGENT_NAME,
                &format!("mine run {}", run.trace_id),
            )?;

            let mut relations: Vec<CandidateRelation> =
                self.parse_output(&run.outputs, &format!("d{i}-relations.relations"))?;
            all_relations.append(&mut relations);
            let mut table_facts: Vec<CandidateRelation> =
                self.parse_output(&run.outputs, &format!("d{i}-tablefacts.relations"))?;
            all_relations.append(&mut table_facts);
        }
        let fused: Vec<FusedCandidate> = self.parse_output(&run.outputs, "fuse.fused")?;

        // Link fused candidates; remember entity per (label, class).
        let mut links: Vec<(String, String, LinkResult)> = Vec::new();
        let mut entity_of: BTreeMap<(String, String), String> = BTreeMap::new();
        let mut ambiguous = 0;
        for candidate in &fused {
            let provenance = candidate.mentions.first().map(|m| m.pid.to_string());
            let result =
                self.kg
                    .link_entity(&self.ontology, &candidate.label, &candidate.class, provenance.as_deref())?;
            match &result {
                LinkResult::Linked(id) | LinkResult::Created(id) => {
                    entity_of.insert(candidate_key(&candidate.label, &candidate.class), id.clone());
                }
                LinkResult::Ambiguous(_) => ambiguous += 1,
            }
            links.push((candidate.label.clone(), candidate.class.clone(), result));

            if let Some(concept) = gazetteer.concept_for_label(&candidate.label) {
                if self.taxonomy.get(concept).is_ok() {
                    let mut seen = std::collections::BTreeSet::new();
                    for m in &candidate.mentions {
                        if seen.insert(m.pid.clone()) {
                            self.annotations.annotate(&m.pid, concept, candidate.fused_confidence);
                        }
                    }
                }
            }
        }

        // Table-fact subjects may not have come through entity extraction
        // (their mentions live only in the relation); link them too.
        for relation in &all_relations {
            let key = candidate_key(&relation.subject.canonical_label, &relation.subject.candidate_class);
            if !entity_of.contains_key(&key) {
                let result = self.kg.link_entity(
                    &self.ontology,
                    &relation.subject.canonical_label,
                    &relation.subject.candidate_class,
                    Some(relation.subject.pid.as_str()),
                )?;
                if let LinkResult::Linked(id) | LinkResult::Created(id) = result {
                    entity_of.insert(key, id);
                }
            }
            if let RelationObject::Mention(m) = &relation.object {
                let key = candidate_key(&m.canonical_label, &m.candidate_class);
                if !entity_of.contains_key(&key) {
                    let result = self.kg.link_entity(
                        &self.ontology,
                        &m.canonical_label,
                        &m.candidate_class,
                        Some(m.pid.as_str()),
                    )?;
                    if let LinkResult::Linked(id) | LinkResult::Created(id) = result {
                        entity_of.insert(key, id);
                    }
                }
            }
        }

        // Assert relations whose predicates the ontology declares.
        let mut assertions_added = 0;
        let mut skipped: Vec<String> = Vec::new();
        for relation in &all_relations {
            match self.assert_relation(relation, &entity_of) {
                Ok(true) => assertions_added += 1,
                Ok(false) => {}
                Err(Error::UndeclaredProperty(p)) => skipped.push(p),
                Err(other) => return Err(other),
            }
        }
        skipped.sort();
        skipped.dedup();

        for pid in pids {
            self.assets.advance_stage(pid, Stage::Knowledge)?;
        }
        let inferred = self.materialize();
        self.persist_kb()?;

        Ok(MineReport {
            trace_id: run.trace_id,
            outputs: run.outputs,
            links,
            assertions_added,
            inferred,
            skipped_predicates: skipped,
            ambiguous,
        })
    }

    fn mine_spec(
        &self,
        pids: &[Pid],
        gazetteer: &Gazetteer,
        patterns: &PatternSet,
    ) -> Result<PipelineSpec> {
        let gaz_value = serde_json::to_value(gazetteer)?;
        let patterns_value = serde_json::to_value(patterns)?;
        let honorifics_value = serde_json::to_value(&gazetteer.honorifics)?;

        let mut steps: BTreeMap<String, StepSpec> = BTreeMap::new();
        let mut fuse_inputs: BTreeMap<String, StepInput> = BTreeMap::new();

        for (i, pid) in pids.iter().enumerate() {
            let asset = self.assets.get(pid)?;
            let format = asset
                .format
                .clone()
                .ok_or_else(|| Error::UnsupportedFormat(format!("{pid} has unknown format")))?;
            let step = |op: &str, params: serde_json::Value, inputs: Vec<(&str, StepInput)>| StepSpec {
                operation_id: op.to_string(),
                operation_version: ops::BUILTIN_VERSION.to_string(),
                parameters: params,
                inputs: inputs.into_iter().map(|(n, s)| (n.to_string(), s)).collect(),
            };
            let from = |step_name: &str, output: &str| StepInput::Step {
                step: step_name.to_string(),
                output: output.to_string(),
            };

            let extract = format!("d{i}-extract");
            steps.insert(
                extract.clone(),
                step(
                    ops::EXTRACT_CONTENT,
                    serde_json::json!({"pid": pid.as_str(), "format": format.as_str()}),
                    vec![("source", StepInput::External { pid: pid.to_string() })],
                ),
            );
            steps.insert(
                format!("d{i}-index"),
                step(ops::INDEX_DOCUMENT, serde_json::Value::Null, vec![("record", from(&extract, "record"))]),
            );
            steps.insert(
                format!("d{i}-entities"),
                step(
                    ops::EXTRACT_ENTITIES,
                    serde_json::json!({"gazetteer": gaz_value}),
                    vec![("record", from(&extract, "record"))],
                ),
            );
            steps.insert(
                format!("d{i}-attributes"),
                step(ops::EXTRACT_ATTRIBUTES, serde_json::Value::Null, vec![("record", from(&extract, "record"))]),
            );
            steps.insert(
                format!("d{i}-relations"),
                step(
                    ops::EXTRACT_RELATIONS,
                    serde_json::json!({"patterns": patterns_value}),
                    vec![
                        ("record", from(&extract, "record")),
                        ("mentions", from(&format!("d{i}-entities"), "mentions")),
                        ("attributes", from(&format!("d{i}-attributes"), "attributes")),
                    ],
                ),
            );
            steps.insert(
                format!("d{i}-tablefacts"),
                step(
                    ops::EXTRACT_TABLE_FACTS,
                    serde_json::json!({"gazetteer": gaz_value}),
                    vec![("record", from(&extract, "record"))],
                ),
            );
            fuse_inputs.insert(
                format!("mentions:{i}"),
                from(&format!("d{i}-entities"), "mentions"),
            );
        }

        steps.insert(
            "fuse".to_string(),
            StepSpec {
                operation_id: ops::FUSE_CANDIDATES.to_string(),
                operation_version: ops::BUILTIN_VERSION.to_string(),
                parameters: serde_json::json!({"honorifics": honorifics_value}),
                inputs: fuse_inputs,
            },
        );
        Ok(PipelineSpec { steps })
    }

    fn parse_output<T: serde::de::DeserializeOwned>(
        &self,
        outputs: &BTreeMap<String, Pid>,
        key: &str,
    ) -> Result<T> {
        let pid = outputs
            .get(key)
            .ok_or_else(|| Error::MissingInput(format!("pipeline output {key}")))?;
        let asset = self.assets.get(pid)?;
        let bytes = self.blobs.get_blob(&asset.blob)?;
        Ok(serde_json::from_slice(&bytes)
            .map_err(|e| Error::Parse(format!("pipeline output {key}: {e}")))?)
    }

    /// Returns Ok(true) when a new fact was asserted, Ok(false) on
    /// duplicates or unresolvable endpoints.
    fn assert_relation(
        &mut self,
        relation: &CandidateRelation,
        entity_of: &BTreeMap<(String, String), String>,
    ) -> Result<bool> {
        let prop = self
            .ontology
            .property(&relation.predicate_label)
            .ok_or_else(|| Error::UndeclaredProperty(relation.predicate_label.clone()))?
            .clone();

        let subject_key = candidate_key(&relation.subject.canonical_label, &relation.subject.candidate_class);
        let Some(subject) = entity_of.get(&subject_key) else {
            return Ok(false); // subject was ambiguous; left to curation
        };

        let object: Node = match (&prop.kind, &relation.object) {
            (PropertyKind::Object, RelationObject::Mention(m)) => {
                let key = candidate_key(&m.canonical_label, &m.candidate_class);
                match entity_of.get(&key) {
                    Some(id) => Node::Id(id.clone()),
                    None => return Ok(false),
                }
            }
            (PropertyKind::Data, RelationObject::Attribute(attr)) => {
                let PropertyRange::Datatype(dt) = prop.range else {
                    return Ok(false);
                };
                match attribute_lexical(&attr.value, dt) {
                    Some(lexical) => KnowledgeGraph::literal_for(&self.ontology, &prop.name, &lexical)?,
                    None => return Ok(false),
                }
            }
            // Kind/object shape mismatch: not assertable as-is.
            _ => return Ok(false),
        };

        let fact = Fact::new(subject.clone(), prop.name.clone(), object);
        let added = self
            .kg
            .assert_fact(&self.ontology, fact, Some(relation.pid.as_str()))?;
        Ok(added)
    }
}

fn candidate_key(label: &str, class: &str) -> (String, String) {
    (normalize_surface(label), class.to_string())
}

/// Lexical form of an attribute under the property's declared datatype.
fn attribute_lexical(value: &AttributeValue, datatype: Datatype) -> Option<String> {
    match (value, datatype) {
        (AttributeValue::Date { iso }, Datatype::Date) => Some(iso.clone()),
        (AttributeValue::Date { iso }, Datatype::String) => Some(iso.clone()),
        (AttributeValue::Measurement { magnitude, .. }, Datatype::Decimal) => {
            Some(format!("{magnitude}"))
        }
        (AttributeValue::Measurement { magnitude, .. }, Datatype::Integer)
            if magnitude.fract() == 0.0 =>
        {
            Some(format!("{}", *magnitude as i64))
        }
        (AttributeValue::Measurement { magnitude, unit }, Datatype::String) => {
            Some(format!("{magnitude} {unit}"))
        }
        _ => None,
    }
}
