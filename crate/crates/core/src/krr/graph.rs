//! The knowledge graph: entities, provenance-bearing assertions, and
//! entity linking.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::ontology::{Ontology, PropertyKind, PropertyRange};
use super::rules::Node;
use super::TYPE_PREDICATE;
use crate::error::{Error, Result};
use crate::kea::normalize_surface;

/// A ground edge: subject entity id, predicate (property name or `type`),
/// object node.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Fact {
    pub subject: String,
    pub predicate: String,
    pub object: Node,
}

impl Fact {
    pub fn new(subject: impl Into<String>, predicate: impl Into<String>, object: Node) -> Self {
        Fact {
            subject: subject.into(),
            predicate: predicate.into(),
            object,
        }
    }

    pub fn typing(subject: impl Into<String>, class: impl Into<String>) -> Self {
        Fact::new(subject, TYPE_PREDICATE, Node::Id(class.into()))
    }
}

impl std::fmt::Display for Fact {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}({}, {})", self.predicate, self.subject, self.object.display())
    }
}

/// Whether an assertion was explicitly asserted or derived by the reasoner.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Origin {
    Asserted,
    Inferred,
}

/// A fact with its origin and provenance, the unit the graph exposes.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Assertion {
    pub subject: String,
    pub predicate: String,
    pub object: Node,
    pub origin: Origin,
    /// Trace activity id or source pid for asserted facts.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub provenance: Option<String>,
    /// Present iff the assertion was inferred.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rule_id: Option<String>,
}

/// A knowledge-graph instance node.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Entity {
    /// IRI-like id: `ikmf:ent:<slug>`.
    pub id: String,
    pub label: String,
    pub classes: BTreeSet<String>,
    #[serde(default)]
    pub alt_labels: BTreeSet<String>,
}

/// Result of linking a fused candidate against the graph.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum LinkResult {
    /// Unambiguous match with an existing entity.
    Linked(String),
    /// No match; a provisional entity was created.
    Created(String),
    /// Multiple matches; recorded for curation, nothing auto-linked.
    Ambiguous(Vec<String>),
}

/// An ambiguous link recorded for human curation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PendingLink {
    pub label: String,
    pub class: String,
    pub candidates: Vec<String>,
}

/// Entities plus asserted and materialized facts. Mutation marks the
/// materialization stale; the reasoner refreshes it by full recompute.
#[derive(Debug, Clone, Default)]
pub struct KnowledgeGraph {
    entities: BTreeMap<String, Entity>,
    asserted: BTreeMap<Fact, Option<String>>,
    inferred: BTreeMap<Fact, String>,
    pending: Vec<PendingLink>,
    stale: bool,
}

#[derive(Debug, Serialize, Deserialize)]
struct PersistedGraph {
    entities: Vec<Entity>,
    assertions: Vec<Assertion>,
    #[serde(default)]
    pending_curation: Vec<PendingLink>,
}

impl KnowledgeGraph {
    pub fn entity(&self, id: &str) -> Option<&Entity> {
        self.entities.get(id)
    }

    pub fn entities(&self) -> impl Iterator<Item = &Entity> {
        self.entities.values()
    }

    pub fn entity_count(&self) -> usize {
        self.entities.len()
    }

    pub fn pending_curation(&self) -> &[PendingLink] {
        &self.pending
    }

    /// Add an entity whose classes are declared in the ontology. Each
    /// class yields an asserted `type` fact carrying `provenance`.
    pub fn add_entity(&mut self, onto: &Ontology, entity: Entity, provenance: Option<&str>) -> Result<()> {
        if self.entities.contains_key(&entity.id) {
            return Err(Error::Invalid(format!("entity {} already exists", entity.id)));
        }
        for class in &entity.classes {
            if onto.class(class).is_none() {
                return Err(Error::UnknownClass(class.clone()));
            }
        }
        let classes = entity.classes.clone();
        let id = entity.id.clone();
        self.entities.insert(id.clone(), entity);
        for class in classes {
            self.assert_fact(onto, Fact::typing(id.clone(), class), provenance)?;
        }
        Ok(())
    }

    /// Store a fact. Duplicates are ignored (returns false); any insert
    /// marks the materialization stale.
    pub fn assert_fact(
        &mut self,
        onto: &Ontology,
        fact: Fact,
        provenance: Option<&str>,
    ) -> Result<bool> {
        self.validate_fact(onto, &fact)?;
        if self.asserted.contains_key(&fact) {
            return Ok(false);
        }
        self.asserted.insert(fact, provenance.map(str::to_string));
        self.stale = true;
        Ok(true)
    }

    fn validate_fact(&self, onto: &Ontology, fact: &Fact) -> Result<()> {
        if !self.entities.contains_key(&fact.subject) {
            return Err(Error::NotFound(format!("entity {}", fact.subject)));
        }
        if fact.predicate == TYPE_PREDICATE {
            return match &fact.object {
                Node::Id(class) if onto.class(class).is_some() => Ok(()),
                Node::Id(class) => Err(Error::UnknownClass(class.clone())),
                Node::Literal { .. } => {
                    Err(Error::TypeMismatch("type object must be a class".into()))
                }
            };
        }
        let prop = onto
            .property(&fact.predicate)
            .ok_or_else(|| Error::UndeclaredProperty(fact.predicate.clone()))?;
        match (&prop.kind, &fact.object) {
            (PropertyKind::Object, Node::Id(id)) => {
                if !self.entities.contains_key(id) {
                    return Err(Error::NotFound(format!("entity {id}")));
                }
                Ok(())
            }
            (PropertyKind::Object, Node::Literal { .. }) => Err(Error::TypeMismatch(format!(
                "object property {} takes an entity",
                prop.name
            ))),
            (PropertyKind::Data, Node::Literal { lexical, datatype }) => {
                let PropertyRange::Datatype(declared) = &prop.range else {
                    return Err(Error::Invalid(format!("data property {} lacks a datatype range", prop.name)));
                };
                if datatype != declared {
                    return Err(Error::TypeMismatch(format!(
                        "literal datatype {datatype} does not match declared range {declared} of {}",
                        prop.name
                    )));
                }
                if !declared.validates(lexical) {
                    return Err(Error::TypeMismatch(format!(
                        "literal {lexical:?} is not a valid {declared} (range of {})",
                        prop.name
                    )));
                }
                Ok(())
            }
            (PropertyKind::Data, Node::Id(_)) => Err(Error::TypeMismatch(format!(
                "data property {} takes a literal",
                prop.name
            ))),
        }
    }

    /// Build a literal node for a data property, validating against its
    /// declared range.
    pub fn literal_for(onto: &Ontology, property: &str, lexical: &str) -> Result<Node> {
        let prop = onto
            .property(property)
            .ok_or_else(|| Error::UndeclaredProperty(property.to_string()))?;
        let PropertyRange::Datatype(dt) = &prop.range else {
            return Err(Error::TypeMismatch(format!("{property} is not a data property")));
        };
        if !dt.validates(lexical) {
            return Err(Error::TypeMismatch(format!(
                "literal {lexical:?} is not a valid {dt} (range of {property})"
            )));
        }
        Ok(Node::Literal {
            lexical: lexical.to_string(),
            datatype: *dt,
        })
    }

    /// Remove an asserted fact. Inferred facts cannot be retracted
    /// directly; they disappear on re-materialization when unsupported.
    pub fn retract_fact(&mut self, fact: &Fact) -> bool {
        let removed = self.asserted.remove(fact).is_some();
        if removed {
            self.stale = true;
        }
        removed
    }

    pub fn contains(&self, fact: &Fact) -> bool {
        self.asserted.contains_key(fact) || self.inferred.contains_key(fact)
    }

    pub fn asserted_facts(&self) -> impl Iterator<Item = &Fact> {
        self.asserted.keys()
    }

    /// Asserted plus inferred facts (the materialized graph).
    pub fn all_facts(&self) -> impl Iterator<Item = &Fact> {
        self.asserted.keys().chain(self.inferred.keys())
    }

    pub fn is_stale(&self) -> bool {
        self.stale
    }

    pub(super) fn set_materialization(&mut self, inferred: BTreeMap<Fact, String>) {
        self.inferred = inferred;
        self.stale = false;
    }

    pub fn inferred_count(&self) -> usize {
        self.inferred.len()
    }

    /// All assertions with origin, provenance, and rule ids.
    pub fn assertions(&self) -> Vec<Assertion> {
        let mut out: Vec<Assertion> = self
            .asserted
            .iter()
            .map(|(f, prov)| Assertion {
                subject: f.subject.clone(),
                predicate: f.predicate.clone(),
                object: f.object.clone(),
                origin: Origin::Asserted,
                provenance: prov.clone(),
                rule_id: None,
            })
            .collect();
        out.extend(self.inferred.iter().map(|(f, rule)| Assertion {
            subject: f.subject.clone(),
            predicate: f.predicate.clone(),
            object: f.object.clone(),
            origin: Origin::Inferred,
            provenance: None,
            rule_id: Some(rule.clone()),
        }));
        out.sort_by(|a, b| {
            (&a.subject, &a.predicate, &a.object).cmp(&(&b.subject, &b.predicate, &b.object))
        });
        out
    }

    /// The provenance recorded for an asserted fact.
    pub fn provenance_of(&self, fact: &Fact) -> Option<&str> {
        self.asserted.get(fact).and_then(|p| p.as_deref())
    }

    /// Rule id that first derived an inferred fact.
    pub fn rule_of(&self, fact: &Fact) -> Option<&str> {
        self.inferred.get(fact).map(String::as_str)
    }

    /// Materialized classes of an entity.
    pub fn types_of(&self, entity_id: &str) -> BTreeSet<String> {
        self.all_facts()
            .filter(|f| f.subject == entity_id && f.predicate == TYPE_PREDICATE)
            .filter_map(|f| match &f.object {
                Node::Id(c) => Some(c.clone()),
                Node::Literal { .. } => None,
            })
            .collect()
    }

    // -----------------------------------------------------------------
    // Entity linking
    // -----------------------------------------------------------------

    /// Link a candidate (label, class) against the graph.
    ///
    /// Precedence: exact normalized-label match within a compatible class;
    /// then unique alt-label match; multiple matches are ambiguous and
    /// recorded for curation; no match creates a provisional entity.
    pub fn link_entity(
        &mut self,
        onto: &Ontology,
        label: &str,
        class: &str,
        provenance: Option<&str>,
    ) -> Result<LinkResult> {
        if onto.class(class).is_none() {
            return Err(Error::UnknownClass(class.to_string()));
        }
        let norm = normalize_surface(label);
        let compatible = |e: &Entity| {
            let types = self.types_of(&e.id);
            let declared = if types.is_empty() { &e.classes } else { &types };
            declared.iter().any(|c| onto.is_subclass_of(c, class))
        };

        let exact: Vec<String> = self
            .entities
            .values()
            .filter(|e| normalize_surface(&e.label) == norm && compatible(e))
            .map(|e| e.id.clone())
            .collect();
        let matches = if exact.is_empty() {
            self.entities
                .values()
                .filter(|e| {
                    e.alt_labels.iter().any(|a| normalize_surface(a) == norm) && compatible(e)
                })
                .map(|e| e.id.clone())
                .collect()
        } else {
            exact
        };

        match matches.len() {
            1 => Ok(LinkResult::Linked(matches.into_iter().next().expect("one match"))),
            0 => {
                let id = self.fresh_entity_id(label);
                self.add_entity(
                    onto,
                    Entity {
                        id: id.clone(),
                        label: label.to_string(),
                        classes: BTreeSet::from([class.to_string()]),
                        alt_labels: BTreeSet::new(),
                    },
                    provenance,
                )?;
                Ok(LinkResult::Created(id))
            }
            _ => {
                self.pending.push(PendingLink {
                    label: label.to_string(),
                    class: class.to_string(),
                    candidates: matches.clone(),
                });
                Ok(LinkResult::Ambiguous(matches))
            }
        }
    }

    fn fresh_entity_id(&self, label: &str) -> String {
        let slug: String = normalize_surface(label).replace(' ', "-");
        let slug = if slug.is_empty() { "entity".to_string() } else { slug };
        let base = format!("ikmf:ent:{slug}");
        if !self.entities.contains_key(&base) {
            return base;
        }
        let mut n = 2;
        loop {
            let candidate = format!("{base}-{n}");
            if !self.entities.contains_key(&candidate) {
                return candidate;
            }
            n += 1;
        }
    }

    // -----------------------------------------------------------------
    // Persistence
    // -----------------------------------------------------------------

    /// Serializable snapshot: entities and asserted facts (inferred facts
    /// are re-derivable and not persisted).
    pub fn to_persisted(&self) -> impl Serialize {
        PersistedGraph {
            entities: self.entities.values().cloned().collect(),
            assertions: self
                .asserted
                .iter()
                .map(|(f, prov)| Assertion {
                    subject: f.subject.clone(),
                    predicate: f.predicate.clone(),
                    object: f.object.clone(),
                    origin: Origin::Asserted,
                    provenance: prov.clone(),
                    rule_id: None,
                })
                .collect(),
            pending_curation: self.pending.clone(),
        }
    }

    /// Rebuild from a snapshot, re-validating against the ontology.
    pub fn from_json(onto: &Ontology, json: &str) -> Result<Self> {
        let persisted: PersistedGraph = serde_json::from_str(json)?;
        let mut kg = KnowledgeGraph::default();
        for e in persisted.entities {
            for class in &e.classes {
                if onto.class(class).is_none() {
                    return Err(Error::UnknownClass(class.clone()));
                }
            }
            kg.entities.insert(e.id.clone(), e);
        }
        for a in persisted.assertions {
            let fact = Fact::new(a.subject, a.predicate, a.object);
            kg.validate_fact(onto, &fact)?;
            kg.asserted.insert(fact, a.provenance);
        }
        kg.pending = persisted.pending_curation;
        kg.stale = true;
        Ok(kg)
    }
}
