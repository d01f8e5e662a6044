//! Stage-3/4 representation and reasoning: SKOS-style taxonomy, ontology,
//! knowledge graph with per-assertion provenance, entity linking,
//! forward-chaining inference, consistency checking, semantic search, and
//! multi-hop conjunctive query.

mod graph;
mod ontology;
mod query;
mod reason;
mod rules;
mod semantic;
mod taxonomy;

pub use graph::{Assertion, Entity, Fact, KnowledgeGraph, LinkResult, Origin, PendingLink};
pub use ontology::{ClassDef, Datatype, Ontology, PropertyDef, PropertyKind, PropertyRange};
pub use query::{parse_pattern, query, QueryPattern};
pub use reason::{check_consistency, compile_rules, materialize, Violation, ViolationKind};
pub use rules::{parse_rule, parse_rules, Atom, Node, Rule, RuleTerm};
pub use semantic::AnnotationStore;
pub use taxonomy::{Concept, Taxonomy};

/// The reserved typing predicate.
pub const TYPE_PREDICATE: &str = "type";
