//! SKOS-style taxonomy: concepts with preferred/alternative labels,
//! broader/narrower hierarchy, and associative links.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One taxonomy concept.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Concept {
    pub id: String,
    pub pref_label: String,
    #[serde(default)]
    pub alt_labels: Vec<String>,
    /// Ids of broader (parent) concepts.
    #[serde(default)]
    pub broader: BTreeSet<String>,
    /// Associative, non-hierarchical links.
    #[serde(default)]
    pub related: BTreeSet<String>,
    #[serde(default)]
    pub scope_note: String,
}

/// A validated concept scheme. Serializes as a concept list and
/// re-validates on deserialization.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(try_from = "TaxonomyFile", into = "TaxonomyFile")]
pub struct Taxonomy {
    concepts: BTreeMap<String, Concept>,
}

/// On-disk shape of a taxonomy.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct TaxonomyFile {
    #[serde(default)]
    concepts: Vec<Concept>,
}

impl TryFrom<TaxonomyFile> for Taxonomy {
    type Error = Error;
    fn try_from(file: TaxonomyFile) -> Result<Self> {
        Taxonomy::new(file.concepts)
    }
}

impl From<Taxonomy> for TaxonomyFile {
    fn from(tax: Taxonomy) -> Self {
        TaxonomyFile {
            concepts: tax.concepts.into_values().collect(),
        }
    }
}

impl Taxonomy {
    pub fn new(concepts: Vec<Concept>) -> Result<Self> {
        let mut map = BTreeMap::new();
        for c in concepts {
            if map.insert(c.id.clone(), c).is_some() {
                return Err(Error::Invalid("duplicate concept id".into()));
            }
        }
        let tax = Taxonomy { concepts: map };
        tax.validate()?;
        Ok(tax)
    }

    pub fn from_json(json: &str) -> Result<Self> {
        Ok(serde_json::from_str(json)?)
    }

    pub fn is_empty(&self) -> bool {
        self.concepts.is_empty()
    }

    pub fn get(&self, id: &str) -> Result<&Concept> {
        self.concepts
            .get(id)
            .ok_or_else(|| Error::NotFound(format!("concept {id}")))
    }

    pub fn concepts(&self) -> impl Iterator<Item = &Concept> {
        self.concepts.values()
    }

    /// Resolve a concept by id, preferred label, or alternative label
    /// (labels case-insensitively).
    pub fn resolve(&self, name: &str) -> Result<&Concept> {
        if let Some(c) = self.concepts.get(name) {
            return Ok(c);
        }
        let folded = name.to_lowercase();
        let mut by_label: Vec<&Concept> = self
            .concepts
            .values()
            .filter(|c| {
                c.pref_label.to_lowercase() == folded
                    || c.alt_labels.iter().any(|a| a.to_lowercase() == folded)
            })
            .collect();
        by_label.sort_by(|a, b| a.id.cmp(&b.id));
        by_label
            .first()
            .copied()
            .ok_or_else(|| Error::NotFound(format!("concept {name}")))
    }

    fn validate(&self) -> Result<()> {
        let mut labels = BTreeSet::new();
        for c in self.concepts.values() {
            if !labels.insert(c.pref_label.to_lowercase()) {
                return Err(Error::Invalid(format!(
                    "preferred label {:?} is not unique within the scheme",
                    c.pref_label
                )));
            }
            for b in &c.broader {
                if !self.concepts.contains_key(b) {
                    return Err(Error::Invalid(format!(
                        "concept {} names unknown broader concept {b}",
                        c.id
                    )));
                }
            }
            for r in &c.related {
                if !self.concepts.contains_key(r) {
                    return Err(Error::Invalid(format!(
                        "concept {} names unknown related concept {r}",
                        c.id
                    )));
                }
            }
        }
        // Broader must be acyclic.
        for id in self.concepts.keys() {
            if self.broader_closure(id)?.contains(id) {
                return Err(Error::Cycle(format!("broader cycle through {id}")));
            }
        }
        Ok(())
    }

    /// Transitive closure over `broader`, excluding the concept itself.
    pub fn broader_closure(&self, concept_id: &str) -> Result<BTreeSet<String>> {
        let start = self.get(concept_id)?;
        let mut seen = BTreeSet::new();
        let mut queue: VecDeque<&str> = start.broader.iter().map(String::as_str).collect();
        while let Some(id) = queue.pop_front() {
            if !seen.insert(id.to_string()) {
                continue;
            }
            let c = self.get(id)?;
            for b in &c.broader {
                queue.push_back(b);
            }
        }
        if seen.contains(concept_id) {
            return Err(Error::Cycle(format!("broader cycle through {concept_id}")));
        }
        Ok(seen)
    }

    /// The concept plus all transitive narrower descendants — the concept
    /// set a search for this concept expands to.
    pub fn expand_query_concepts(&self, concept_id: &str) -> Result<BTreeSet<String>> {
        self.get(concept_id)?;
        let narrower = self.narrower_map();
        let mut seen = BTreeSet::new();
        let mut queue = VecDeque::from([concept_id.to_string()]);
        while let Some(id) = queue.pop_front() {
            if !seen.insert(id.clone()) {
                continue;
            }
            if let Some(children) = narrower.get(&id) {
                for c in children {
                    queue.push_back(c.clone());
                }
            }
        }
        Ok(seen)
    }

    /// Inverse of broader: parent id -> child ids.
    fn narrower_map(&self) -> BTreeMap<String, BTreeSet<String>> {
        let mut map: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
        for c in self.concepts.values() {
            for b in &c.broader {
                map.entry(b.clone()).or_default().insert(c.id.clone());
            }
        }
        map
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    fn concept(id: &str, label: &str, broader: &[&str]) -> Concept {
        Concept {
            id: id.into(),
            pref_label: label.into(),
            alt_labels: vec![],
            broader: broader.iter().map(|s| s.to_string()).collect(),
            related: BTreeSet::new(),
            scope_note: String::new(),
        }
    }

    /// The economic-cooperation scheme: policy > cooperation > {integration,
    /// european industrial cooperation}, with an associative link.
    pub(crate) fn economics() -> Taxonomy {
        let mut coop = concept("economic-cooperation", "Economic cooperation", &["economic-policy"]);
        coop.alt_labels.push("Economic co-operation".into());
        coop.related.insert("interdependence".into());
        Taxonomy::new(vec![
            concept("economic-policy", "Economic policy", &[]),
            coop,
            concept("economic-integration", "Economic integration", &["economic-cooperation"]),
            concept(
                "european-industrial-cooperation",
                "European industrial cooperation",
                &["economic-integration"],
            ),
            concept("interdependence", "Interdependence", &[]),
        ])
        .unwrap()
    }

    #[test]
    fn closure_walks_broader_chain() {
        let tax = economics();
        let closure = tax.broader_closure("european-industrial-cooperation").unwrap();
        assert!(closure.contains("economic-cooperation"));
        assert!(closure.contains("economic-policy"));
        assert!(!closure.contains("european-industrial-cooperation"));
    }

    #[test]
    fn root_has_empty_closure() {
        let tax = economics();
        assert!(tax.broader_closure("economic-policy").unwrap().is_empty());
    }

    #[test]
    fn closure_equals_bfs_oracle() {
        let tax = economics();
        // Independent BFS over the raw broader edges.
        fn oracle(tax: &Taxonomy, id: &str) -> BTreeSet<String> {
            let mut out = BTreeSet::new();
            let mut stack: Vec<String> =
                tax.get(id).unwrap().broader.iter().cloned().collect();
            while let Some(x) = stack.pop() {
                if out.insert(x.clone()) {
                    stack.extend(tax.get(&x).unwrap().broader.iter().cloned());
                }
            }
            out
        }
        for c in tax.concepts() {
            assert_eq!(tax.broader_closure(&c.id).unwrap(), oracle(&tax, &c.id));
        }
    }

    #[test]
    fn expansion_includes_descendants() {
        let tax = economics();
        let exp = tax.expand_query_concepts("economic-cooperation").unwrap();
        assert!(exp.contains("economic-cooperation"));
        assert!(exp.contains("economic-integration"));
        assert!(exp.contains("european-industrial-cooperation"));
        assert!(!exp.contains("economic-policy"));
    }

    #[test]
    fn leaf_expands_to_itself() {
        let tax = economics();
        let exp = tax.expand_query_concepts("interdependence").unwrap();
        assert_eq!(exp.len(), 1);
        assert!(exp.contains("interdependence"));
    }

    #[test]
    fn expansion_is_inverse_of_closure() {
        let tax = economics();
        for c in tax.concepts() {
            let expanded = tax.expand_query_concepts(&c.id).unwrap();
            // x in expansion(c) iff c in closure(x), plus c itself.
            for x in tax.concepts() {
                let in_expansion = expanded.contains(&x.id);
                let closure_hit =
                    x.id == c.id || tax.broader_closure(&x.id).unwrap().contains(&c.id);
                assert_eq!(in_expansion, closure_hit, "concept {} vs {}", c.id, x.id);
            }
        }
    }

    #[test]
    fn cycles_are_rejected_at_load() {
        let err = Taxonomy::new(vec![
            concept("a", "A", &["b"]),
            concept("b", "B", &["a"]),
        ])
        .unwrap_err();
        assert!(matches!(err, Error::Cycle(_)));
    }

    #[test]
    fn duplicate_pref_labels_rejected() {
        let err = Taxonomy::new(vec![
            concept("a", "Same Label", &[]),
            concept("b", "same label", &[]),
        ])
        .unwrap_err();
        assert!(matches!(err, Error::Invalid(_)));
    }

    #[test]
    fn unknown_concept_is_not_found() {
        let tax = economics();
        assert!(matches!(tax.broader_closure("nope"), Err(Error::NotFound(_))));
        assert!(matches!(tax.expand_query_concepts("nope"), Err(Error::NotFound(_))));
    }

    #[test]
    fn resolve_by_label_and_alt_label() {
        let tax = economics();
        assert_eq!(tax.resolve("Economic cooperation").unwrap().id, "economic-cooperation");
        assert_eq!(tax.resolve("economic CO-OPERATION").unwrap().id, "economic-cooperation");
        assert_eq!(tax.resolve("economic-policy").unwrap().id, "economic-policy");
    }
}
