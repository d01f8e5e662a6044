//! Concept annotations on documents and semantic search.
//!
//! The mining pipeline annotates documents (pid -> concept -> confidence);
//! a semantic query for a concept retrieves every document annotated with
//! the concept or any of its transitive narrower descendants.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::taxonomy::Taxonomy;
use crate::content::SearchHit;
use crate::error::Result;
use crate::store::Pid;

/// pid -> concept id -> confidence (max-merged on repeat annotation).
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct AnnotationStore {
    annotations: BTreeMap<Pid, BTreeMap<String, f64>>,
}

impl AnnotationStore {
    pub fn annotate(&mut self, pid: &Pid, concept_id: &str, confidence: f64) {
        let slot = self
            .annotations
            .entry(pid.clone())
            .or_default()
            .entry(concept_id.to_string())
            .or_insert(confidence);
        if confidence > *slot {
            *slot = confidence;
        }
    }

    pub fn concepts_of(&self, pid: &Pid) -> BTreeMap<String, f64> {
        self.annotations.get(pid).cloned().unwrap_or_default()
    }

    pub fn is_empty(&self) -> bool {
        self.annotations.is_empty()
    }

    /// Documents annotated with any concept in the expansion of
    /// `concept_id`, ranked by the best matching annotation confidence,
    /// ties broken by ascending pid.
    pub fn semantic_search(
        &self,
        taxonomy: &Taxonomy,
        concept_id: &str,
        k: usize,
    ) -> Result<Vec<SearchHit>> {
        let expansion = taxonomy.expand_query_concepts(concept_id)?;
        let mut hits = Vec::new();
        for (pid, concepts) in &self.annotations {
            // Best expanded concept; ties prefer the lexicographically
            // smallest concept id (BTreeMap order + strict improvement).
            let mut best: Option<(&str, f64)> = None;
            for (cid, conf) in concepts {
                if expansion.contains(cid) && best.map_or(true, |(_, b)| *conf > b) {
                    best = Some((cid, *conf));
                }
            }
            if let Some((cid, conf)) = best {
                hits.push(SearchHit {
                    pid: pid.clone(),
                    score: conf,
                    snippet: taxonomy.get(cid)?.pref_label.clone(),
                });
            }
        }
        hits.sort_by(|a, b| {
            b.score
                .partial_cmp(&a.score)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then_with(|| a.pid.cmp(&b.pid))
        });
        hits.truncate(k);
        Ok(hits)
    }
}
