//! Engine facade: owns the store root and all subsystems, and implements
//! the cross-module flows (ingest, mine, archive, reproduce, policy).

mod archive;
mod mine;
mod ops;
mod pipeline;

pub use archive::ActionOutcome;
pub use mine::MineReport;
pub use pipeline::PipelineRun;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use crate::canon;
use crate::content::{self, ContentRecord, SearchHit, SearchIndex};
use crate::error::{Error, Result};
use crate::format::FormatId;
use crate::kap::{
    ContextEntity, ContextLink, ContextRegistry, EventLog, EventOutcome, EventType,
    FormatRecord, FormatRegistry, FormatRisk, PreservationEvent,
};
use crate::kea::FusedCandidate;
use crate::krr::{
    self, AnnotationStore, Fact, KnowledgeGraph, LinkResult, Node, Ontology, QueryPattern, Rule,
    Taxonomy, Violation,
};
use crate::prov::{OperationFn, OperationRegistry, AGENT_NAME};
use crate::store::{
    AssetRegistry, BlobId, BlobStore, DigitalAsset, FixityRecord, Pid, Stage, StoreLock,
};

/// One source -> derived edge, mirrored out of the provenance traces for
/// cheap derivative lookups.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub(crate) struct Derivation {
    pub source: Pid,
    pub derived: Pid,
    pub trace: String,
}

pub struct Engine {
    root: PathBuf,
    _lock: StoreLock,
    read_only: bool,
    pub(crate) blobs: BlobStore,
    pub(crate) assets: AssetRegistry,
    pub(crate) events: EventLog,
    pub(crate) formats: FormatRegistry,
    pub(crate) context: ContextRegistry,
    pub(crate) taxonomy: Taxonomy,
    pub(crate) ontology: Ontology,
    pub(crate) rules: Vec<Rule>,
    pub(crate) kg: KnowledgeGraph,
    pub(crate) annotations: AnnotationStore,
    pub(crate) index: SearchIndex,
    pub(crate) registry: OperationRegistry,
    pub(crate) trace_index: BTreeMap<Pid, String>,
    pub(crate) derivations: Vec<Derivation>,
}

impl std::fmt::Debug for Engine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Engine").field("root", &self.root).finish()
    }
}

impl Engine {
    /// Open a store for reading and writing (exclusive lock).
    pub fn open(root: impl AsRef<Path>) -> Result<Self> {
        let lock = StoreLock::exclusive(root.as_ref())?;
        Self::load(root.as_ref(), lock, false)
    }

    /// Open a store for querying only (shared lock; mutations rejected).
    pub fn open_read_only(root: impl AsRef<Path>) -> Result<Self> {
        let lock = StoreLock::shared(root.as_ref())?;
        Self::load(root.as_ref(), lock, true)
    }

    fn load(root: &Path, lock: StoreLock, read_only: bool) -> Result<Self> {
        fs::create_dir_all(root)?;
        let kb = root.join("kb");
        let ontology = match fs::read_to_string(kb.join("ontology.json")) {
            Ok(json) => Ontology::from_json(&json)?,
            Err(_) => Ontology::default(),
        };
        let taxonomy = match fs::read_to_string(kb.join("taxonomy.json")) {
            Ok(json) => Taxonomy::from_json(&json)?,
            Err(_) => Taxonomy::default(),
        };
        let rules: Vec<Rule> = read_json(&kb.join("rules.json"))?.unwrap_or_default();
        let kg = match fs::read_to_string(kb.join("graph.json")) {
            Ok(json) => KnowledgeGraph::from_json(&ontology, &json)?,
            Err(_) => KnowledgeGraph::default(),
        };
        let annotations: AnnotationStore =
            read_json(&kb.join("annotations.json"))?.unwrap_or_default();
        let trace_index: BTreeMap<Pid, String> =
            read_json(&root.join("prov").join("index.json"))?.unwrap_or_default();
        let derivations: Vec<Derivation> =
            read_json(&root.join("derivations.json"))?.unwrap_or_default();

        let mut registry = OperationRegistry::new();
        ops::register_builtin_operations(&mut registry)?;
        crate::kap::migrate::register_builtin_migrators(&mut registry)?;

        Ok(Engine {
            blobs: BlobStore::new(root),
            assets: AssetRegistry::load(root)?,
            events: EventLog::load(root)?,
            formats: FormatRegistry::load(root)?,
            context: ContextRegistry::load(root)?,
            index: SearchIndex::load(root)?,
            root: root.to_path_buf(),
            _lock: lock,
            read_only,
            taxonomy,
            ontology,
            rules,
            kg,
            annotations,
            registry,
            trace_index,
            derivations,
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn writable(&self) -> Result<()> {
        if self.read_only {
            return Err(Error::Invalid("store opened read-only".into()));
        }
        Ok(())
    }

    // -----------------------------------------------------------------
    // Stage 1: bitstreams, exact match, fixity
    // -----------------------------------------------------------------

    pub fn put_blob(&mut self, bytes: &[u8]) -> Result<BlobId> {
        self.writable()?;
        self.blobs.put_blob(bytes)
    }

    pub fn get_blob(&self, id: &BlobId) -> Result<Vec<u8>> {
        self.blobs.get_blob(id)
    }

    /// Ingest bytes as a new asset: store the blob, mint a PID, identify
    /// the format (unless overridden), and record the ingest event.
    pub fn ingest(
        &mut self,
        bytes: &[u8],
        source_hint: &str,
        format_override: Option<FormatId>,
    ) -> Result<DigitalAsset> {
        self.writable()?;
        let blob = self.blobs.put_blob(bytes)?;
        let format = match format_override {
            Some(f) => {
                if !self.formats.contains(&f) {
                    return Err(Error::UnknownFormat(f.to_string()));
                }
                f
            }
            None => self.identify_format(bytes),
        };
        let asset = self.assets.register(blob, Some(format), source_hint)?;
        self.events.record(
            &asset.pid,
            EventType::Ingest,
            EventOutcome::Success,
            AGENT_NAME,
            source_hint,
        )?;
        Ok(asset)
    }

    pub fn asset(&self, pid: &Pid) -> Result<&DigitalAsset> {
        self.assets.get(pid)
    }

    pub fn assets(&self) -> Vec<&DigitalAsset> {
        self.assets.all()
    }

    pub fn exact_match(&self, id: &BlobId) -> Vec<Pid> {
        self.assets.exact_match(id)
    }

    /// Recompute the stored digest and log a fixity-check event.
    pub fn verify_fixity(&mut self, pid: &Pid) -> Result<FixityRecord> {
        self.writable()?;
        let asset = self.assets.get(pid)?;
        let expected = asset.blob.clone();
        let observed = BlobId::of(&self.blobs.read_raw(&expected)?);
        let ok = observed == expected;
        let record = FixityRecord {
            pid: pid.clone(),
            expected: expected.clone(),
            observed: observed.clone(),
            verified_at: canon::now_rfc3339(),
            ok,
        };
        self.events.record(
            pid,
            EventType::FixityCheck,
            if ok { EventOutcome::Success } else { EventOutcome::Failure },
            AGENT_NAME,
            &format!("expected {expected}, observed {observed}"),
        )?;
        Ok(record)
    }

    /// Fixity-check every asset, in ingest order.
    pub fn audit_fixity(&mut self) -> Result<Vec<FixityRecord>> {
        let pids: Vec<Pid> = self.assets.all().iter().map(|a| a.pid.clone()).collect();
        pids.into_iter().map(|pid| self.verify_fixity(&pid)).collect()
    }

    // -----------------------------------------------------------------
    // Stage 2: content and syntactic search
    // -----------------------------------------------------------------

    pub fn identify_format(&self, bytes: &[u8]) -> FormatId {
        content::identify_format(bytes, &self.formats.signatures())
    }

    /// Parse the asset's structure and format; advances its stage.
    pub fn extract(&mut self, pid: &Pid) -> Result<ContentRecord> {
        self.writable()?;
        let asset = self.assets.get(pid)?;
        let format = asset
            .format
            .clone()
            .ok_or_else(|| Error::UnsupportedFormat("unknown format".into()))?;
        let bytes = self.blobs.get_blob(&asset.blob)?;
        let record = content::extract_content(pid, &format, &bytes)?;
        self.assets.advance_stage(pid, Stage::Content)?;
        self.events.record(
            pid,
            EventType::Extraction,
            EventOutcome::Success,
            AGENT_NAME,
            &format!("extracted as {format}"),
        )?;
        Ok(record)
    }

    pub fn index_record(&mut self, record: &ContentRecord) -> Result<()> {
        self.writable()?;
        self.index.index_document(record)
    }

    pub fn syntactic_search(&self, query: &str, k: usize) -> Vec<SearchHit> {
        self.index.search(query, k)
    }

    // -----------------------------------------------------------------
    // Stage 3/4: knowledge base
    // -----------------------------------------------------------------

    pub fn set_ontology(&mut self, ontology: Ontology) -> Result<()> {
        self.writable()?;
        self.ontology = ontology;
        self.persist_kb()
    }

    pub fn set_taxonomy(&mut self, taxonomy: Taxonomy) -> Result<()> {
        self.writable()?;
        self.taxonomy = taxonomy;
        self.persist_kb()
    }

    pub fn set_rules(&mut self, rules: Vec<Rule>) -> Result<()> {
        self.writable()?;
        self.rules = rules;
        self.persist_kb()
    }

    pub fn ontology(&self) -> &Ontology {
        &self.ontology
    }

    pub fn taxonomy(&self) -> &Taxonomy {
        &self.taxonomy
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    pub fn graph(&self) -> &KnowledgeGraph {
        &self.kg
    }

    pub fn annotations(&self) -> &AnnotationStore {
        &self.annotations
    }

    pub fn assert_fact(&mut self, fact: Fact, provenance: Option<&str>) -> Result<bool> {
        self.writable()?;
        let added = self.kg.assert_fact(&self.ontology, fact, provenance)?;
        if added {
            self.persist_kb()?;
        }
        Ok(added)
    }

    pub fn retract_fact(&mut self, fact: &Fact) -> Result<bool> {
        self.writable()?;
        let removed = self.kg.retract_fact(fact);
        if removed {
            self.persist_kb()?;
        }
        Ok(removed)
    }

    pub fn add_entity(&mut self, entity: krr::Entity, provenance: Option<&str>) -> Result<()> {
        self.writable()?;
        self.kg.add_entity(&self.ontology, entity, provenance)?;
        self.persist_kb()
    }

    /// Replace the whole knowledge graph (e.g. a snapshot import).
    pub fn replace_graph(&mut self, graph: KnowledgeGraph) -> Result<()> {
        self.writable()?;
        self.kg = graph;
        self.persist_kb()
    }

    /// Link a fused candidate into the graph.
    pub fn link_candidate(
        &mut self,
        candidate: &FusedCandidate,
        provenance: Option<&str>,
    ) -> Result<LinkResult> {
        self.writable()?;
        let result = self
            .kg
            .link_entity(&self.ontology, &candidate.label, &candidate.class, provenance)?;
        self.persist_kb()?;
        Ok(result)
    }

    /// Forward-chain to fixpoint; returns the inferred-assertion count.
    pub fn materialize(&mut self) -> usize {
        krr::materialize(&mut self.kg, &self.ontology, &self.rules)
    }

    pub fn check_consistency(&mut self) -> Vec<Violation> {
        if self.kg.is_stale() {
            self.materialize();
        }
        krr::check_consistency(&self.kg, &self.ontology)
    }

    /// Evaluate a conjunctive pattern; refreshes a stale materialization
    /// first.
    pub fn query(&mut self, pattern: &QueryPattern) -> Result<Vec<Vec<Node>>> {
        if self.kg.is_stale() {
            self.materialize();
        }
        krr::query(&self.kg, pattern)
    }

    pub fn annotate(&mut self, pid: &Pid, concept_id: &str, confidence: f64) -> Result<()> {
        self.writable()?;
        self.taxonomy.get(concept_id)?;
        self.assets.get(pid)?;
        self.annotations.annotate(pid, concept_id, confidence);
        self.persist_kb()
    }

    /// Concept search: the query concept is resolved by id or label, then
    /// expanded over its narrower descendants.
    pub fn semantic_search(&self, concept: &str, k: usize) -> Result<Vec<SearchHit>> {
        let concept_id = self.taxonomy.resolve(concept)?.id.clone();
        self.annotations.semantic_search(&self.taxonomy, &concept_id, k)
    }

    pub(crate) fn persist_kb(&self) -> Result<()> {
        if self.read_only {
            return Ok(());
        }
        let kb = self.root.join("kb");
        fs::create_dir_all(&kb)?;
        fs::write(kb.join("ontology.json"), canon::to_canonical_json_line(&self.ontology)?)?;
        fs::write(kb.join("taxonomy.json"), canon::to_canonical_json_line(&self.taxonomy)?)?;
        fs::write(kb.join("rules.json"), canon::to_canonical_json_line(&self.rules)?)?;
        fs::write(
            kb.join("graph.json"),
            canon::to_canonical_json_line(&self.kg.to_persisted())?,
        )?;
        fs::write(
            kb.join("annotations.json"),
            canon::to_canonical_json_line(&self.annotations)?,
        )?;
        Ok(())
    }

    pub(crate) fn persist_derivations(&self) -> Result<()> {
        fs::write(
            self.root.join("derivations.json"),
            canon::to_canonical_json_line(&self.derivations)?,
        )?;
        Ok(())
    }

    // -----------------------------------------------------------------
    // Archiving stream: events, context, formats
    // -----------------------------------------------------------------

    pub fn record_event(
        &mut self,
        pid: &Pid,
        event_type: EventType,
        outcome: EventOutcome,
        detail: &str,
    ) -> Result<u64> {
        self.writable()?;
        self.assets.get(pid)?;
        self.events.record(pid, event_type, outcome, AGENT_NAME, detail)
    }

    pub fn events_for(&self, pid: &Pid) -> Vec<&PreservationEvent> {
        self.events.events_for(pid)
    }

    pub fn register_context_entity(&mut self, entity: ContextEntity) -> Result<String> {
        self.writable()?;
        self.context.register_entity(entity)
    }

    pub fn link_context(&mut self, link: ContextLink) -> Result<()> {
        self.writable()?;
        self.context.link(link)
    }

    pub fn context(&self) -> &ContextRegistry {
        &self.context
    }

    pub fn register_format(&mut self, record: FormatRecord) -> Result<()> {
        self.writable()?;
        self.formats.register(record)
    }

    pub fn set_format_risk(&mut self, format: &FormatId, risk: FormatRisk) -> Result<()> {
        self.writable()?;
        self.formats.set_risk(format, risk)
    }

    pub fn set_format_migration(
        &mut self,
        format: &FormatId,
        target: FormatId,
        migrator_id: &str,
    ) -> Result<()> {
        self.writable()?;
        self.formats.set_migration(format, target, migrator_id)
    }

    pub fn formats(&self) -> &FormatRegistry {
        &self.formats
    }

    // -----------------------------------------------------------------
    // Operation registry
    // -----------------------------------------------------------------

    /// Register an operation implementation under (id, version).
    pub fn register_operation(
        &mut self,
        operation_id: &str,
        version: &str,
        implementation: OperationFn,
    ) -> Result<()> {
        self.writable()?;
        self.registry.register(operation_id, version, implementation)
    }

    pub fn operations(&self) -> Vec<(String, String)> {
        self.registry.operations()
    }

    pub(crate) fn latest_version(&self, operation_id: &str) -> Option<String> {
        self.registry
            .operations()
            .into_iter()
            .filter(|(id, _)| id == operation_id)
            .map(|(_, v)| v)
            .max()
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Option<T>> {
    if !path.exists() {
        return Ok(None);
    }
    let text = fs::read_to_string(path)?;
    Ok(Some(serde_json::from_str(&text).map_err(|e| {
        Error::Parse(format!("{}: {e}", path.display()))
    })?))
}
