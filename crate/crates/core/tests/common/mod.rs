//! Shared fixtures and independent oracles for integration tests.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use ikmf_core::kea::{Gazetteer, PatternSet};
use ikmf_core::krr::{
    Atom, ClassDef, Concept, Datatype, Fact, Node, Ontology, PropertyDef, PropertyKind,
    PropertyRange, Rule, RuleTerm, Taxonomy,
};

pub fn class(name: &str, supers: &[&str]) -> ClassDef {
    ClassDef {
        name: name.into(),
        superclasses: supers.iter().map(|s| s.to_string()).collect(),
        disjoint_with: BTreeSet::new(),
    }
}

pub fn object_property(name: &str, domain: &str, range: &str, supers: &[&str]) -> PropertyDef {
    PropertyDef {
        name: name.into(),
        kind: PropertyKind::Object,
        domain: domain.into(),
        range: PropertyRange::Class(range.into()),
        superproperties: supers.iter().map(|s| s.to_string()).collect(),
    }
}

pub fn data_property(name: &str, domain: &str, datatype: Datatype) -> PropertyDef {
    PropertyDef {
        name: name.into(),
        kind: PropertyKind::Data,
        domain: domain.into(),
        range: PropertyRange::Datatype(datatype),
        superproperties: BTreeSet::new(),
    }
}

/// The research ontology every end-to-end fixture shares.
pub fn demo_ontology() -> Ontology {
    let mut person = class("Person", &["Agent"]);
    person.disjoint_with.insert("Organisation".into());
    Ontology::new(
        vec![
            class("Agent", &[]),
            person,
            class("Organisation", &["Agent"]),
            class("Project", &[]),
            class("Dataset", &[]),
            class("Researcher", &["Person"]),
            class("Topic", &[]),
        ],
        vec![
            object_property("worksOn", "Person", "Project", &[]),
            object_property("isPrincipalInvestigatorFor", "Person", "Project", &["worksOn"]),
            object_property("org", "Person", "Organisation", &[]),
            object_property("generatedBy", "Dataset", "Project", &[]),
            object_property("ledBy", "Project", "Researcher", &[]),
            object_property("memberOf", "Researcher", "Organisation", &[]),
            data_property("joined", "Person", Datatype::Date),
            data_property("hasBudget", "Project", Datatype::Decimal),
        ],
    )
    .unwrap()
}

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

/// The SKOS economics scheme: policy above cooperation above
/// {integration above european industrial cooperation}.
pub fn demo_taxonomy() -> Taxonomy {
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

pub fn demo_gazetteer() -> Gazetteer {
    Gazetteer::from_json(
        r#"{
          "honorifics": ["Dr.", "Prof."],
          "entries": [
            {"surface": "Smith", "label": "Smith", "class": "Person"},
            {"surface": "Project X", "label": "Project X", "class": "Project"},
            {"surface": "FernUni", "label": "FernUni", "class": "Organisation"},
            {"surface": "industrial partnership", "label": "Industrial partnership", "class": "Topic",
             "concept": "european-industrial-cooperation"}
          ]
        }"#,
    )
    .unwrap()
}

pub fn demo_patterns() -> PatternSet {
    PatternSet::from_json(
        r#"{"patterns": [{
          "subject_class": "Person",
          "connective": "is principal investigator for",
          "object_class": "Project",
          "predicate": "isPrincipalInvestigatorFor"
        }]}"#,
    )
    .unwrap()
}

// ---------------------------------------------------------------------------
// Naive fixpoint oracle (independent of the engine's semi-naive join path)
// ---------------------------------------------------------------------------

/// Re-run every rule against the full fact set until nothing changes.
/// Returns the inferred facts (closure minus the asserted facts).
pub fn naive_fixpoint(rules: &[Rule], asserted: &BTreeSet<Fact>) -> BTreeSet<Fact> {
    let mut full: BTreeSet<Fact> = asserted.clone();
    loop {
        let mut new_facts: Vec<Fact> = Vec::new();
        for rule in rules {
            let bindings = naive_eval_body(&rule.body, &full);
            for b in bindings {
                if let Some(fact) = naive_instantiate(&rule.head, &b) {
                    if !full.contains(&fact) {
                        new_facts.push(fact);
                    }
                }
            }
        }
        if new_facts.is_empty() {
            return full.difference(asserted).cloned().collect();
        }
        full.extend(new_facts);
    }
}

fn naive_eval_body(body: &[Atom], facts: &BTreeSet<Fact>) -> Vec<BTreeMap<String, Node>> {
    let mut bindings = vec![BTreeMap::new()];
    for atom in body {
        let mut next = Vec::new();
        for b in &bindings {
            for fact in facts {
                if fact.predicate != atom.predicate {
                    continue;
                }
                let mut b2 = b.clone();
                if naive_unify(&atom.subject, &Node::Id(fact.subject.clone()), &mut b2)
                    && naive_unify(&atom.object, &fact.object, &mut b2)
                {
                    next.push(b2);
                }
            }
        }
        bindings = next;
    }
    bindings
}

fn naive_unify(term: &RuleTerm, value: &Node, bindings: &mut BTreeMap<String, Node>) -> bool {
    match term {
        RuleTerm::Const(c) => value.matches_constant(c),
        RuleTerm::Var(v) => match bindings.get(v) {
            Some(existing) => existing == value,
            None => {
                bindings.insert(v.clone(), value.clone());
                true
            }
        },
    }
}

fn naive_instantiate(head: &Atom, bindings: &BTreeMap<String, Node>) -> Option<Fact> {
    let subject = match &head.subject {
        RuleTerm::Const(c) => c.clone(),
        RuleTerm::Var(v) => match bindings.get(v)? {
            Node::Id(s) => s.clone(),
            Node::Literal { .. } => return None,
        },
    };
    let object = match &head.object {
        RuleTerm::Const(c) => Node::Id(c.clone()),
        RuleTerm::Var(v) => bindings.get(v)?.clone(),
    };
    Some(Fact::new(subject, head.predicate.clone(), object))
}

// ---------------------------------------------------------------------------
// Brute-force BM25 oracle
// ---------------------------------------------------------------------------

/// Tokenize with the same public tokenizer but score from scratch:
/// no inverted index, no shared scoring code.
pub fn brute_force_bm25(corpus: &[(String, String)], query: &str) -> Vec<(String, f64)> {
    let tokens = |text: &str| -> Vec<String> {
        ikmf_core::content::tokenize(text)
            .into_iter()
            .map(|t| t.term)
            .collect()
    };
    let docs: Vec<(String, Vec<String>)> = corpus
        .iter()
        .map(|(id, text)| (id.clone(), tokens(text)))
        .collect();
    let n = docs.len() as f64;
    let avgdl = docs.iter().map(|(_, t)| t.len() as f64).sum::<f64>() / n;
    let query_terms = tokens(query);

    let mut scored = Vec::new();
    for (id, terms) in &docs {
        let mut score = 0.0;
        for q in &query_terms {
            let tf = terms.iter().filter(|t| *t == q).count() as f64;
            if tf == 0.0 {
                continue;
            }
            let df = docs.iter().filter(|(_, d)| d.contains(q)).count() as f64;
            let idf = (1.0 + (n - df + 0.5) / (df + 0.5)).ln();
            score += idf * tf * (1.2 + 1.0) / (tf + 1.2 * (1.0 - 0.75 + 0.75 * terms.len() as f64 / avgdl));
        }
        if score > 0.0 {
            scored.push((id.clone(), score));
        }
    }
    scored.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    scored
}
