//! Stage-3 extraction: deterministic gazetteer and pattern extractors that
//! turn content records into candidate knowledge concepts, plus fusion of
//! duplicate candidates across origins and documents.
//!
//! Deterministic extractors stand in for statistical NER so that every
//! mining run is reproducible; model-backed extractors can be attached
//! through the same pure-operation interface later.

mod extract;
mod fuse;
mod gazetteer;

pub use extract::{extract_attributes, extract_entities, extract_relations, extract_table_facts};
pub use fuse::fuse_candidates;
pub use gazetteer::{normalize_surface, ExtractionPattern, Gazetteer, GazetteerEntry, PatternSet};

use serde::{Deserialize, Serialize};

use crate::store::Pid;

/// Where a mention was found.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Origin {
    Prose,
    Table,
}

/// A gazetteer hit in a document.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Mention {
    pub pid: Pid,
    pub start: usize,
    pub end: usize,
    /// Exact slice of the source text at the span.
    pub surface: String,
    /// Canonical label from the gazetteer entry that matched.
    pub canonical_label: String,
    pub candidate_class: String,
    pub confidence: f64,
    pub origin: Origin,
}

/// Normalized attribute value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum AttributeValue {
    /// ISO-8601 calendar date.
    Date { iso: String },
    Measurement { magnitude: f64, unit: String },
}

/// A date or measurement found in a document.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AttributeMention {
    pub pid: Pid,
    pub start: usize,
    pub end: usize,
    pub value: AttributeValue,
    pub confidence: f64,
}

/// Object of a candidate relation.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type")]
pub enum RelationObject {
    Mention(Mention),
    Attribute(AttributeMention),
}

/// A candidate knowledge-graph edge extracted from one document.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CandidateRelation {
    pub pid: Pid,
    pub subject: Mention,
    pub predicate_label: String,
    pub object: RelationObject,
    pub confidence: f64,
    /// Span of the supporting evidence in the source text.
    pub evidence_start: usize,
    pub evidence_end: usize,
}

/// Result of fusing duplicate mentions of one (label, class) identity.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FusedCandidate {
    pub label: String,
    pub class: String,
    pub mentions: Vec<Mention>,
    /// Noisy-or over supporting mention confidences:
    /// `1 - prod(1 - c_i)`.
    pub fused_confidence: f64,
}
