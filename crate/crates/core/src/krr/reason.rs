//! Forward chaining to the least fixpoint, and consistency checking.
//!
//! The ontology's axioms compile into the same rule form as user rules:
//!
//! * subproperty  `p(?x,?y) -> q(?x,?y)`          (id `subprop:p:q`)
//! * subclass     `type(?x,"C") -> type(?x,"D")`  (id `subclass:C:D`)
//! * domain       `p(?x,?y) -> type(?x,"dom(p)")` (id `domain:p`)
//! * range        `p(?x,?y) -> type(?y,"rng(p)")` (id `range:p`, object
//!   properties only)
//!
//! Evaluation is semi-naive: each round joins one body atom against the
//! facts new in the previous round and the rest against the full set, so
//! derivations repeat only at round boundaries. Rules are safe positive
//! Horn, so the fixpoint is unique and reached without value invention.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::graph::{Assertion, Fact, KnowledgeGraph, Origin};
use super::ontology::{Ontology, PropertyKind, PropertyRange};
use super::rules::{Atom, Node, Rule, RuleTerm};
use super::TYPE_PREDICATE;

/// Compile ontology axioms into rules and append the user rules.
pub fn compile_rules(onto: &Ontology, user_rules: &[Rule]) -> Vec<Rule> {
    let var = |name: &str| RuleTerm::Var(name.to_string());
    let atom = |predicate: &str, s: RuleTerm, o: RuleTerm| Atom {
        predicate: predicate.to_string(),
        subject: s,
        object: o,
    };
    let mut rules = Vec::new();
    for p in onto.properties() {
        for q in &p.superproperties {
            rules.push(Rule {
                id: format!("subprop:{}:{q}", p.name),
                body: vec![atom(&p.name, var("x"), var("y"))],
                head: atom(q, var("x"), var("y")),
            });
        }
        rules.push(Rule {
            id: format!("domain:{}", p.name),
            body: vec![atom(&p.name, var("x"), var("y"))],
            head: atom(TYPE_PREDICATE, var("x"), RuleTerm::Const(p.domain.clone())),
        });
        if p.kind == PropertyKind::Object {
            if let PropertyRange::Class(range) = &p.range {
                rules.push(Rule {
                    id: format!("range:{}", p.name),
                    body: vec![atom(&p.name, var("x"), var("y"))],
                    head: atom(TYPE_PREDICATE, var("y"), RuleTerm::Const(range.clone())),
                });
            }
        }
    }
    for c in onto.classes() {
        for d in &c.superclasses {
            rules.push(Rule {
                id: format!("subclass:{}:{d}", c.name),
                body: vec![atom(TYPE_PREDICATE, var("x"), RuleTerm::Const(c.name.clone()))],
                head: atom(TYPE_PREDICATE, var("x"), RuleTerm::Const(d.clone())),
            });
        }
    }
    rules.extend(user_rules.iter().cloned());
    rules
}

/// Materialize the graph: recompute all inferred facts from the asserted
/// ones. Returns the number of inferred facts. Idempotent.
pub fn materialize(kg: &mut KnowledgeGraph, onto: &Ontology, user_rules: &[Rule]) -> usize {
    let rules = compile_rules(onto, user_rules);
    let asserted: BTreeSet<Fact> = kg.asserted_facts().cloned().collect();
    let inferred = fixpoint(&rules, &asserted);
    let count = inferred.len();
    kg.set_materialization(inferred);
    count
}

/// Semi-naive least fixpoint: facts derivable from `asserted`, minus
/// `asserted` itself, each tagged with the first rule that derived it.
fn fixpoint(rules: &[Rule], asserted: &BTreeSet<Fact>) -> BTreeMap<Fact, String> {
    let mut full: BTreeSet<Fact> = asserted.clone();
    let mut delta: BTreeSet<Fact> = asserted.clone();
    let mut inferred: BTreeMap<Fact, String> = BTreeMap::new();

    while !delta.is_empty() {
        let full_index = FactIndex::build(&full);
        let delta_index = FactIndex::build(&delta);
        let mut fresh: BTreeMap<Fact, String> = BTreeMap::new();

        for rule in rules {
            for delta_pos in 0..rule.body.len() {
                let mut bindings = BTreeMap::new();
                join(
                    rule,
                    0,
                    delta_pos,
                    &full_index,
                    &delta_index,
                    &mut bindings,
                    &mut |bindings| {
                        if let Some(fact) = instantiate(&rule.head, bindings) {
                            if !full.contains(&fact) {
                                fresh.entry(fact).or_insert_with(|| rule.id.clone());
                            }
                        }
                    },
                );
            }
        }

        delta = fresh.keys().cloned().collect();
        for (fact, rule_id) in fresh {
            full.insert(fact.clone());
            inferred.entry(fact).or_insert(rule_id);
        }
    }
    inferred
}

struct FactIndex<'a> {
    by_predicate: BTreeMap<&'a str, Vec<&'a Fact>>,
}

impl<'a> FactIndex<'a> {
    fn build(facts: &'a BTreeSet<Fact>) -> Self {
        let mut by_predicate: BTreeMap<&str, Vec<&Fact>> = BTreeMap::new();
        for f in facts {
            by_predicate.entry(f.predicate.as_str()).or_default().push(f);
        }
        FactIndex { by_predicate }
    }

    fn candidates(&self, predicate: &str) -> &[&'a Fact] {
        self.by_predicate.get(predicate).map(Vec::as_slice).unwrap_or(&[])
    }
}

/// Nested-loop join with binding propagation; `delta_pos` names the body
/// atom restricted to last round's new facts.
fn join(
    rule: &Rule,
    atom_idx: usize,
    delta_pos: usize,
    full: &FactIndex,
    delta: &FactIndex,
    bindings: &mut BTreeMap<String, Node>,
    emit: &mut dyn FnMut(&BTreeMap<String, Node>),
) {
    if atom_idx == rule.body.len() {
        emit(bindings);
        return;
    }
    let atom = &rule.body[atom_idx];
    let source = if atom_idx == delta_pos { delta } else { full };
    for fact in source.candidates(&atom.predicate) {
        let mut bound_here = Vec::new();
        if unify(atom, fact, bindings, &mut bound_here) {
            join(rule, atom_idx + 1, delta_pos, full, delta, bindings, emit);
        }
        for var in bound_here {
            bindings.remove(&var);
        }
    }
}

/// Try to unify an atom with a fact under the current bindings, recording
/// the variables newly bound so the caller can backtrack.
fn unify(
    atom: &Atom,
    fact: &Fact,
    bindings: &mut BTreeMap<String, Node>,
    bound_here: &mut Vec<String>,
) -> bool {
    // Subject position holds an entity id.
    let subject_node = Node::Id(fact.subject.clone());
    if !unify_term(&atom.subject, &subject_node, bindings, bound_here) {
        return false;
    }
    unify_term(&atom.object, &fact.object, bindings, bound_here)
}

fn unify_term(
    term: &RuleTerm,
    value: &Node,
    bindings: &mut BTreeMap<String, Node>,
    bound_here: &mut Vec<String>,
) -> bool {
    match term {
        RuleTerm::Const(c) => value.matches_constant(c),
        RuleTerm::Var(v) => match bindings.get(v) {
            Some(existing) => existing == value,
            None => {
                bindings.insert(v.clone(), value.clone());
                bound_here.push(v.clone());
                true
            }
        },
    }
}

/// Instantiate a head atom. Returns None when a variable bound to a
/// literal lands in subject position (no such fact can exist).
fn instantiate(head: &Atom, bindings: &BTreeMap<String, Node>) -> Option<Fact> {
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
// Consistency
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ViolationKind {
    DomainViolation,
    RangeViolation,
    DisjointnessViolation,
}

/// A consistency report entry citing the axiom and assertion in conflict.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub assertion: Assertion,
    pub explanation: String,
}

/// Report logical inconsistencies in the materialized graph.
///
/// Open-world reading: domain and range axioms infer types rather than
/// reject assertions, so violations arise only from explicit disjointness
/// conflicts and from data-property literals that no longer satisfy the
/// declared range (possible after an ontology edit).
pub fn check_consistency(kg: &KnowledgeGraph, onto: &Ontology) -> Vec<Violation> {
    let mut violations = Vec::new();

    let mut types: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
    for fact in kg.all_facts() {
        if fact.predicate == TYPE_PREDICATE {
            if let Node::Id(class) = &fact.object {
                types.entry(fact.subject.as_str()).or_default().insert(class);
            }
        }
    }
    for (entity, classes) in &types {
        let classes: Vec<&&str> = classes.iter().collect();
        for i in 0..classes.len() {
            for j in i + 1..classes.len() {
                let (a, b) = (classes[i], classes[j]);
                if onto.are_disjoint(a, b) {
                    violations.push(Violation {
                        kind: ViolationKind::DisjointnessViolation,
                        assertion: describe(kg, &Fact::typing(entity.to_string(), b.to_string())),
                        explanation: format!(
                            "entity {entity} is typed both {a} and {b}, but {a} is declared disjoint with {b}"
                        ),
                    });
                }
            }
        }
    }

    for fact in kg.asserted_facts() {
        if let Node::Literal { lexical, .. } = &fact.object {
            if let Some(prop) = onto.property(&fact.predicate) {
                if let PropertyRange::Datatype(dt) = &prop.range {
                    if !dt.validates(lexical) {
                        violations.push(Violation {
                            kind: ViolationKind::RangeViolation,
                            assertion: describe(kg, fact),
                            explanation: format!(
                                "literal {lexical:?} no longer satisfies the declared range {dt} of {}",
                                prop.name
                            ),
                        });
                    }
                }
            }
        }
    }

    violations
}

fn describe(kg: &KnowledgeGraph, fact: &Fact) -> Assertion {
    let inferred_by = kg.rule_of(fact);
    Assertion {
        subject: fact.subject.clone(),
        predicate: fact.predicate.clone(),
        object: fact.object.clone(),
        origin: if inferred_by.is_some() { Origin::Inferred } else { Origin::Asserted },
        provenance: kg.provenance_of(fact).map(str::to_string),
        rule_id: inferred_by.map(str::to_string),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::krr::graph::tests::{demo_ontology, entity};
    use crate::krr::rules::parse_rule;
    use crate::Error;

    fn smith_graph() -> (Ontology, KnowledgeGraph) {
        let onto = demo_ontology();
        let mut kg = KnowledgeGraph::default();
        kg.add_entity(&onto, entity("ikmf:ent:smith", "Smith", "Person"), None).unwrap();
        kg.add_entity(&onto, entity("ikmf:ent:project-x", "Project X", "Project"), None).unwrap();
        kg.assert_fact(
            &onto,
            Fact::new(
                "ikmf:ent:smith",
                "isPrincipalInvestigatorFor",
                Node::Id("ikmf:ent:project-x".into()),
            ),
            Some("doc-1"),
        )
        .unwrap();
        (onto, kg)
    }

    #[test]
    fn subproperty_inference() {
        let (onto, mut kg) = smith_graph();
        materialize(&mut kg, &onto, &[]);
        let works_on = Fact::new(
            "ikmf:ent:smith",
            "worksOn",
            Node::Id("ikmf:ent:project-x".into()),
        );
        assert!(kg.contains(&works_on));
        assert_eq!(kg.rule_of(&works_on), Some("subprop:isPrincipalInvestigatorFor:worksOn"));
        // The original stays asserted, not inferred.
        let pi = Fact::new(
            "ikmf:ent:smith",
            "isPrincipalInvestigatorFor",
            Node::Id("ikmf:ent:project-x".into()),
        );
        assert_eq!(kg.provenance_of(&pi), Some("doc-1"));
        assert_eq!(kg.rule_of(&pi), None);
    }

    #[test]
    fn domain_and_range_infer_types() {
        let (onto, mut kg) = smith_graph();
        // Clear the creation-time type facts to watch R3/R4 work.
        kg.retract_fact(&Fact::typing("ikmf:ent:smith", "Person"));
        kg.retract_fact(&Fact::typing("ikmf:ent:project-x", "Project"));
        materialize(&mut kg, &onto, &[]);
        assert!(kg.contains(&Fact::typing("ikmf:ent:smith", "Person")));
        assert!(kg.contains(&Fact::typing("ikmf:ent:project-x", "Project")));
    }

    #[test]
    fn no_axioms_no_inferences_beyond_typing() {
        let onto = Ontology::new(
            vec![crate::krr::ontology::tests::class("Person", &[])],
            vec![],
        )
        .unwrap();
        let mut kg = KnowledgeGraph::default();
        kg.add_entity(&onto, entity("ikmf:ent:a", "A", "Person"), None).unwrap();
        let count = materialize(&mut kg, &onto, &[]);
        assert_eq!(count, 0);
    }

    #[test]
    fn materialize_is_idempotent() {
        let (onto, mut kg) = smith_graph();
        let first = materialize(&mut kg, &onto, &[]);
        let all_after_first: Vec<Fact> = kg.all_facts().cloned().collect();
        let second = materialize(&mut kg, &onto, &[]);
        let all_after_second: Vec<Fact> = kg.all_facts().cloned().collect();
        assert_eq!(first, second);
        assert_eq!(all_after_first, all_after_second);
    }

    #[test]
    fn user_rule_with_constant() {
        let (onto, mut kg) = smith_graph();
        let rule = parse_rule(
            r#"piProjects: isPrincipalInvestigatorFor(?x, ?p) -> type(?p, "Project")"#,
            "x",
        )
        .unwrap();
        materialize(&mut kg, &onto, &[rule]);
        let fact = Fact::typing("ikmf:ent:project-x", "Project");
        // Already asserted at entity creation, so it stays asserted.
        assert!(kg.contains(&fact));
        assert_eq!(kg.rule_of(&fact), None);
    }

    #[test]
    fn chained_user_rules_reach_fixpoint() {
        let onto = Ontology::new(
            vec![crate::krr::ontology::tests::class("Node", &[])],
            vec![crate::krr::ontology::tests::object_property("edge", "Node", "Node", &[])],
        )
        .unwrap();
        let mut kg = KnowledgeGraph::default();
        for id in ["a", "b", "c", "d"] {
            kg.add_entity(&onto, entity(&format!("ikmf:ent:{id}"), id, "Node"), None).unwrap();
        }
        for (s, o) in [("a", "b"), ("b", "c"), ("c", "d")] {
            kg.assert_fact(
                &onto,
                Fact::new(format!("ikmf:ent:{s}"), "edge", Node::Id(format!("ikmf:ent:{o}"))),
                None,
            )
            .unwrap();
        }
        let rules = vec![
            parse_rule("base: edge(?x, ?y) -> path(?x, ?y)", "r1").unwrap(),
            parse_rule("trans: path(?x, ?y), edge(?y, ?z) -> path(?x, ?z)", "r2").unwrap(),
        ];
        materialize(&mut kg, &onto, &rules);
        // Transitive closure of a 4-chain: 3 + 2 + 1 = 6 path facts.
        let paths = kg.all_facts().filter(|f| f.predicate == "path").count();
        assert_eq!(paths, 6);
        assert!(kg.contains(&Fact::new("ikmf:ent:a", "path", Node::Id("ikmf:ent:d".into()))));
    }

    #[test]
    fn monotone_under_new_assertions() {
        let (onto, mut kg) = smith_graph();
        materialize(&mut kg, &onto, &[]);
        let before: BTreeSet<Fact> = kg.all_facts().cloned().collect();
        kg.add_entity(&onto, entity("ikmf:ent:project-y", "Project Y", "Project"), None).unwrap();
        kg.assert_fact(
            &onto,
            Fact::new("ikmf:ent:smith", "worksOn", Node::Id("ikmf:ent:project-y".into())),
            None,
        )
        .unwrap();
        materialize(&mut kg, &onto, &[]);
        let after: BTreeSet<Fact> = kg.all_facts().cloned().collect();
        assert!(before.is_subset(&after));
    }

    #[test]
    fn retraction_recomputes_exactly() {
        let (onto, mut kg) = smith_graph();
        materialize(&mut kg, &onto, &[]);
        let pi = Fact::new(
            "ikmf:ent:smith",
            "isPrincipalInvestigatorFor",
            Node::Id("ikmf:ent:project-x".into()),
        );
        kg.retract_fact(&pi);
        materialize(&mut kg, &onto, &[]);
        let works_on = Fact::new(
            "ikmf:ent:smith",
            "worksOn",
            Node::Id("ikmf:ent:project-x".into()),
        );
        assert!(!kg.contains(&works_on));
    }

    #[test]
    fn disjointness_violation_reported() {
        let (onto, mut kg) = smith_graph();
        // Type smith as an Organisation too; Person and Organisation are disjoint.
        kg.assert_fact(&onto, Fact::typing("ikmf:ent:smith", "Organisation"), None).unwrap();
        materialize(&mut kg, &onto, &[]);
        let violations = check_consistency(&kg, &onto);
        assert_eq!(violations.len(), 1);
        assert_eq!(violations[0].kind, ViolationKind::DisjointnessViolation);
        assert!(violations[0].explanation.contains("disjoint"));
    }

    #[test]
    fn consistent_graph_reports_nothing() {
        let (onto, mut kg) = smith_graph();
        materialize(&mut kg, &onto, &[]);
        assert!(check_consistency(&kg, &onto).is_empty());
    }

    #[test]
    fn bad_literal_rejected_at_assert_never_reaches_checker() {
        let (onto, mut kg) = smith_graph();
        let err = kg
            .assert_fact(
                &onto,
                Fact::new(
                    "ikmf:ent:project-x",
                    "hasBudget",
                    Node::Literal {
                        lexical: "abc".into(),
                        datatype: crate::krr::Datatype::Decimal,
                    },
                ),
                None,
            )
            .unwrap_err();
        assert!(matches!(err, Error::TypeMismatch(_)));
        materialize(&mut kg, &onto, &[]);
        assert!(check_consistency(&kg, &onto).is_empty());
    }
}
