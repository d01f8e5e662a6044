//! Conjunctive multi-hop queries over the materialized graph.
//!
//! Pattern text syntax: atom lines (commas between atoms optional)
//! followed by a `select` clause naming the projected variables.
//!
//! ```text
//! generatedBy(?d, ?p)
//! ledBy(?p, ?r)
//! memberOf(?r, "ikmf:ent:org-x")
//! select ?d
//! ```

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::graph::{Fact, KnowledgeGraph};
use super::rules::{lex, Atom, Node, Parser, RuleTerm, Tok};
use crate::error::{Error, Result};

/// A conjunction of atoms with an ordered projection.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryPattern {
    pub atoms: Vec<Atom>,
    pub projection: Vec<String>,
}

impl QueryPattern {
    pub fn new(atoms: Vec<Atom>, projection: Vec<String>) -> Result<Self> {
        let pattern = QueryPattern { atoms, projection };
        pattern.validate()?;
        Ok(pattern)
    }

    fn validate(&self) -> Result<()> {
        if self.atoms.is_empty() {
            return Err(Error::Invalid("pattern needs at least one atom".into()));
        }
        let mut vars = BTreeSet::new();
        for atom in &self.atoms {
            for t in [&atom.subject, &atom.object] {
                if let RuleTerm::Var(v) = t {
                    vars.insert(v.clone());
                }
            }
        }
        for p in &self.projection {
            if !vars.contains(p) {
                return Err(Error::UnboundProjection(format!("?{p}")));
            }
        }
        if self.projection.is_empty() {
            return Err(Error::Invalid("projection must name at least one variable".into()));
        }
        Ok(())
    }
}

/// Parse the pattern text syntax. `#` comments and blank lines ignored.
pub fn parse_pattern(text: &str) -> Result<QueryPattern> {
    let joined: String = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .collect::<Vec<_>>()
        .join(" ");
    let mut p = Parser::new(lex(&joined)?);
    let mut atoms = Vec::new();
    let mut projection = Vec::new();
    loop {
        match p.peek() {
            Some(Tok::Ident(kw)) if kw == "select" => {
                p.next();
                while let Some(tok) = p.next() {
                    match tok {
                        Tok::Var(v) => projection.push(v),
                        Tok::Comma => {}
                        other => {
                            return Err(Error::Parse(format!(
                                "select clause takes ?variables, found {other:?}"
                            )))
                        }
                    }
                }
                break;
            }
            Some(Tok::Ident(_)) => {
                atoms.push(p.atom()?);
                if let Some(Tok::Comma) = p.peek() {
                    p.next();
                }
            }
            Some(other) => return Err(Error::Parse(format!("unexpected {other:?} in pattern"))),
            None => return Err(Error::Parse("pattern is missing a select clause".into())),
        }
    }
    QueryPattern::new(atoms, projection)
}

/// All satisfying assignments over asserted plus inferred facts, projected
/// and deduplicated, in lexicographic row order.
///
/// Join order is by ascending estimated selectivity: atoms whose constant
/// structure matches the fewest facts bind first.
pub fn query(kg: &KnowledgeGraph, pattern: &QueryPattern) -> Result<Vec<Vec<Node>>> {
    pattern.validate()?;
    let facts: Vec<&Fact> = kg.all_facts().collect();

    let mut order: Vec<usize> = (0..pattern.atoms.len()).collect();
    let selectivity: Vec<usize> = pattern
        .atoms
        .iter()
        .map(|atom| facts.iter().filter(|f| matches_unbound(atom, f)).count())
        .collect();
    order.sort_by_key(|&i| (selectivity[i], i));

    let mut rows: BTreeSet<Vec<Node>> = BTreeSet::new();
    let mut bindings: BTreeMap<String, Node> = BTreeMap::new();
    solve(&pattern.atoms, &order, 0, &facts, &mut bindings, &mut |b| {
        let row: Option<Vec<Node>> = pattern
            .projection
            .iter()
            .map(|v| b.get(v).cloned())
            .collect();
        if let Some(row) = row {
            rows.insert(row);
        }
    });
    Ok(rows.into_iter().collect())
}

/// Does the fact match the atom's constants, ignoring variables?
fn matches_unbound(atom: &Atom, fact: &Fact) -> bool {
    if atom.predicate != fact.predicate {
        return false;
    }
    let subject_ok = match &atom.subject {
        RuleTerm::Const(c) => &fact.subject == c,
        RuleTerm::Var(_) => true,
    };
    let object_ok = match &atom.object {
        RuleTerm::Const(c) => fact.object.matches_constant(c),
        RuleTerm::Var(_) => true,
    };
    subject_ok && object_ok
}

fn solve(
    atoms: &[Atom],
    order: &[usize],
    depth: usize,
    facts: &[&Fact],
    bindings: &mut BTreeMap<String, Node>,
    emit: &mut dyn FnMut(&BTreeMap<String, Node>),
) {
    if depth == order.len() {
        emit(bindings);
        return;
    }
    let atom = &atoms[order[depth]];
    for fact in facts {
        if atom.predicate != fact.predicate {
            continue;
        }
        let mut bound_here = Vec::new();
        let subject_node = Node::Id(fact.subject.clone());
        let ok = unify_term(&atom.subject, &subject_node, bindings, &mut bound_here)
            && unify_term(&atom.object, &fact.object, bindings, &mut bound_here);
        if ok {
            solve(atoms, order, depth + 1, facts, bindings, emit);
        }
        for v in bound_here {
            bindings.remove(&v);
        }
    }
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
