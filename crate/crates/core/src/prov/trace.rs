//! PROV-style derivation graphs: entities, activities, agents.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NodeKind {
    Entity,
    Activity,
    Agent,
}

/// A node in the provenance graph. Activities carry `operation_id`,
/// `operation_version`, `parameters` (canonical JSON), input/output name
/// maps, and timestamps; entities carry `pid` and `blob`; agents carry
/// `name` and `version`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProvNode {
    pub id: String,
    pub kind: NodeKind,
    #[serde(default)]
    pub attrs: BTreeMap<String, serde_json::Value>,
}

impl ProvNode {
    pub fn attr_str(&self, key: &str) -> Option<&str> {
        self.attrs.get(key).and_then(|v| v.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EdgeKind {
    #[serde(rename = "used")]
    Used,
    #[serde(rename = "wasGeneratedBy")]
    WasGeneratedBy,
    #[serde(rename = "wasAssociatedWith")]
    WasAssociatedWith,
    #[serde(rename = "wasDerivedFrom")]
    WasDerivedFrom,
    #[serde(rename = "wasInformedBy")]
    WasInformedBy,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProvEdge {
    pub kind: EdgeKind,
    pub from: String,
    pub to: String,
}

/// A derivation graph, persisted one file per pipeline run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Trace {
    pub id: String,
    pub nodes: Vec<ProvNode>,
    pub edges: Vec<ProvEdge>,
}

impl Trace {
    pub fn node(&self, id: &str) -> Option<&ProvNode> {
        self.nodes.iter().find(|n| n.id == id)
    }

    pub fn entity_by_pid(&self, pid: &str) -> Option<&ProvNode> {
        self.nodes
            .iter()
            .find(|n| n.kind == NodeKind::Entity && n.attr_str("pid") == Some(pid))
    }

    /// The activity that generated an entity, if the trace records one.
    pub fn generator_of(&self, entity_id: &str) -> Option<&str> {
        self.edges
            .iter()
            .find(|e| e.kind == EdgeKind::WasGeneratedBy && e.from == entity_id)
            .map(|e| e.to.as_str())
    }

    /// Entities an activity used.
    pub fn used_by(&self, activity_id: &str) -> Vec<&str> {
        self.edges
            .iter()
            .filter(|e| e.kind == EdgeKind::Used && e.from == activity_id)
            .map(|e| e.to.as_str())
            .collect()
    }

    /// Structural validation: unique node ids, endpoint existence, edge
    /// type constraints, single generator per entity, and acyclicity of
    /// the derivation relation (wasGeneratedBy composed with used).
    pub fn validate(&self) -> Result<()> {
        let mut kinds: BTreeMap<&str, NodeKind> = BTreeMap::new();
        for n in &self.nodes {
            if kinds.insert(n.id.as_str(), n.kind).is_some() {
                return Err(Error::Invalid(format!("duplicate node id {}", n.id)));
            }
        }
        let kind_of = |id: &str| -> Result<NodeKind> {
            kinds
                .get(id)
                .copied()
                .ok_or_else(|| Error::Invalid(format!("edge references unknown node {id}")))
        };
        let mut generated: BTreeSet<&str> = BTreeSet::new();
        for e in &self.edges {
            let (from, to) = (kind_of(&e.from)?, kind_of(&e.to)?);
            let ok = match e.kind {
                EdgeKind::Used => (from, to) == (NodeKind::Activity, NodeKind::Entity),
                EdgeKind::WasGeneratedBy => (from, to) == (NodeKind::Entity, NodeKind::Activity),
                EdgeKind::WasAssociatedWith => (from, to) == (NodeKind::Activity, NodeKind::Agent),
                EdgeKind::WasDerivedFrom => (from, to) == (NodeKind::Entity, NodeKind::Entity),
                EdgeKind::WasInformedBy => (from, to) == (NodeKind::Activity, NodeKind::Activity),
            };
            if !ok {
                return Err(Error::Invalid(format!(
                    "edge {:?} {} -> {} violates its type constraint",
                    e.kind, e.from, e.to
                )));
            }
            if e.kind == EdgeKind::WasGeneratedBy && !generated.insert(e.from.as_str()) {
                return Err(Error::Invalid(format!(
                    "entity {} has more than one generator",
                    e.from
                )));
            }
        }
        self.check_derivation_acyclic()?;
        Ok(())
    }

    /// The wasGeneratedBy and used edges, read as "derives from", must
    /// form a DAG.
    fn check_derivation_acyclic(&self) -> Result<()> {
        let mut succ: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
        for e in &self.edges {
            if matches!(e.kind, EdgeKind::Used | EdgeKind::WasGeneratedBy) {
                succ.entry(e.from.as_str()).or_default().push(e.to.as_str());
            }
        }
        // Iterative DFS with colors.
        let mut state: BTreeMap<&str, u8> = BTreeMap::new(); // 1 = open, 2 = done
        for n in &self.nodes {
            if state.contains_key(n.id.as_str()) {
                continue;
            }
            let mut stack: Vec<(&str, usize)> = vec![(n.id.as_str(), 0)];
            state.insert(n.id.as_str(), 1);
            while let Some((node, idx)) = stack.pop() {
                let next = succ.get(node).and_then(|s| s.get(idx)).copied();
                match next {
                    Some(child) => {
                        stack.push((node, idx + 1));
                        match state.get(child) {
                            Some(1) => {
                                return Err(Error::Cycle(format!(
                                    "derivation cycle through {child}"
                                )))
                            }
                            Some(_) => {}
                            None => {
                                state.insert(child, 1);
                                stack.push((child, 0));
                            }
                        }
                    }
                    None => {
                        state.insert(node, 2);
                    }
                }
            }
        }
        Ok(())
    }

    /// The derivation closure of one entity: everything reachable through
    /// generator activities and their inputs, back to external inputs.
    pub fn derivation_closure(&self, entity_id: &str) -> Result<Trace> {
        if self.node(entity_id).is_none() {
            return Err(Error::NotFound(format!("trace node {entity_id}")));
        }
        let mut keep: BTreeSet<String> = BTreeSet::new();
        let mut queue = VecDeque::from([entity_id.to_string()]);
        while let Some(id) = queue.pop_front() {
            if !keep.insert(id.clone()) {
                continue;
            }
            if let Some(activity) = self.generator_of(&id) {
                queue.push_back(activity.to_string());
                for used in self.used_by(activity) {
                    queue.push_back(used.to_string());
                }
            }
        }
        // Agents of kept activities ride along.
        for e in &self.edges {
            if e.kind == EdgeKind::WasAssociatedWith && keep.contains(&e.from) {
                keep.insert(e.to.clone());
            }
        }
        let nodes: Vec<ProvNode> = self
            .nodes
            .iter()
            .filter(|n| keep.contains(&n.id))
            .cloned()
            .collect();
        let edges: Vec<ProvEdge> = self
            .edges
            .iter()
            .filter(|e| keep.contains(&e.from) && keep.contains(&e.to))
            .cloned()
            .collect();
        Ok(Trace {
            id: self.id.clone(),
            nodes,
            edges,
        })
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub(crate) fn entity(id: &str) -> ProvNode {
        ProvNode {
            id: id.into(),
            kind: NodeKind::Entity,
            attrs: BTreeMap::new(),
        }
    }

    pub(crate) fn activity(id: &str) -> ProvNode {
        ProvNode {
            id: id.into(),
            kind: NodeKind::Activity,
            attrs: BTreeMap::new(),
        }
    }

    fn edge(kind: EdgeKind, from: &str, to: &str) -> ProvEdge {
        ProvEdge {
            kind,
            from: from.into(),
            to: to.into(),
        }
    }

    #[test]
    fn valid_two_step_chain() {
        let trace = Trace {
            id: "t".into(),
            nodes: vec![
                entity("in"),
                activity("a1"),
                entity("mid"),
                activity("a2"),
                entity("out"),
            ],
            edges: vec![
                edge(EdgeKind::Used, "a1", "in"),
                edge(EdgeKind::WasGeneratedBy, "mid", "a1"),
                edge(EdgeKind::Used, "a2", "mid"),
                edge(EdgeKind::WasGeneratedBy, "out", "a2"),
                edge(EdgeKind::WasInformedBy, "a2", "a1"),
                edge(EdgeKind::WasDerivedFrom, "out", "mid"),
            ],
        };
        trace.validate().unwrap();
        let closure = trace.derivation_closure("out").unwrap();
        assert_eq!(closure.nodes.len(), 5);
    }

    #[test]
    fn wrong_edge_direction_rejected() {
        let trace = Trace {
            id: "t".into(),
            nodes: vec![entity("e"), activity("a")],
            edges: vec![edge(EdgeKind::Used, "e", "a")],
        };
        assert!(matches!(trace.validate(), Err(Error::Invalid(_))));
    }

    #[test]
    fn double_generation_rejected() {
        let trace = Trace {
            id: "t".into(),
            nodes: vec![entity("e"), activity("a1"), activity("a2")],
            edges: vec![
                edge(EdgeKind::WasGeneratedBy, "e", "a1"),
                edge(EdgeKind::WasGeneratedBy, "e", "a2"),
            ],
        };
        assert!(matches!(trace.validate(), Err(Error::Invalid(_))));
    }

    #[test]
    fn derivation_cycle_rejected() {
        let trace = Trace {
            id: "t".into(),
            nodes: vec![entity("e1"), activity("a1"), entity("e2"), activity("a2")],
            edges: vec![
                edge(EdgeKind::Used, "a1", "e1"),
                edge(EdgeKind::WasGeneratedBy, "e2", "a1"),
                edge(EdgeKind::Used, "a2", "e2"),
                edge(EdgeKind::WasGeneratedBy, "e1", "a2"),
            ],
        };
        assert!(matches!(trace.validate(), Err(Error::Cycle(_))));
    }

    #[test]
    fn closure_excludes_unrelated_branches() {
        let trace = Trace {
            id: "t".into(),
            nodes: vec![
                entity("in"),
                activity("a1"),
                entity("out1"),
                activity("a2"),
                entity("out2"),
            ],
            edges: vec![
                edge(EdgeKind::Used, "a1", "in"),
                edge(EdgeKind::WasGeneratedBy, "out1", "a1"),
                edge(EdgeKind::Used, "a2", "in"),
                edge(EdgeKind::WasGeneratedBy, "out2", "a2"),
            ],
        };
        let closure = trace.derivation_closure("out1").unwrap();
        let ids: Vec<&str> = closure.nodes.iter().map(|n| n.id.as_str()).collect();
        assert!(ids.contains(&"out1") && ids.contains(&"a1") && ids.contains(&"in"));
        assert!(!ids.contains(&"out2") && !ids.contains(&"a2"));
    }
}
