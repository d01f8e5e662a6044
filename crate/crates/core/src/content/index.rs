//! Inverted index with BM25 ranking.
//!
//! Scoring:
//!
//! ```text
//! score(D,Q) = sum over query tokens t of
//!              idf(t) * tf * (k1 + 1) / (tf + k1 * (1 - b + b * |D| / avgdl))
//! idf(t)     = ln(1 + (N - df + 0.5) / (df + 0.5))
//! ```
//!
//! with k1 = 1.2 and b = 0.75. Documents with no matching term are
//! excluded; ties break by ascending pid.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{tokenize, ContentRecord, SearchHit};
use crate::canon;
use crate::error::Result;
use crate::store::Pid;

const K1: f64 = 1.2;
const B: f64 = 0.75;
const SNIPPET_WIDTH: usize = 80;

/// Per-document state the index persists.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IndexContribution {
    pub pid: Pid,
    pub length: u64,
    pub terms: BTreeMap<String, u64>,
    /// Retained for snippet generation.
    pub text: String,
}

impl IndexContribution {
    pub fn from_record(record: &ContentRecord) -> Self {
        let mut terms: BTreeMap<String, u64> = BTreeMap::new();
        for tok in &record.tokens {
            *terms.entry(tok.term.clone()).or_insert(0) += 1;
        }
        IndexContribution {
            pid: record.pid.clone(),
            length: record.tokens.len() as u64,
            terms,
            text: record.text.clone(),
        }
    }
}

/// The syntactic search index. Mutation replaces the document's postings;
/// queries see a consistent snapshot.
#[derive(Debug, Default)]
pub struct SearchIndex {
    docs: BTreeMap<Pid, IndexContribution>,
    postings: BTreeMap<String, BTreeMap<Pid, u64>>,
    path: Option<PathBuf>,
}

#[derive(Debug, Serialize, Deserialize)]
struct PersistedIndex {
    docs: BTreeMap<Pid, IndexContribution>,
}

impl SearchIndex {
    pub fn in_memory() -> Self {
        SearchIndex::default()
    }

    /// Load from `<root>/index/postings.json`, or start empty.
    pub fn load(root: &Path) -> Result<Self> {
        let path = root.join("index").join("postings.json");
        let mut index = SearchIndex {
            path: Some(path.clone()),
            ..SearchIndex::default()
        };
        if path.exists() {
            let persisted: PersistedIndex = serde_json::from_str(&fs::read_to_string(&path)?)?;
            for (_, contribution) in persisted.docs {
                index.insert(contribution);
            }
        }
        Ok(index)
    }

    /// Index a freshly extracted document.
    pub fn index_document(&mut self, record: &ContentRecord) -> Result<()> {
        self.apply(IndexContribution::from_record(record))
    }

    /// Apply a contribution (replacing any prior postings for the pid).
    pub fn apply(&mut self, contribution: IndexContribution) -> Result<()> {
        self.insert(contribution);
        self.persist()
    }

    fn insert(&mut self, contribution: IndexContribution) {
        self.remove(&contribution.pid.clone());
        for (term, tf) in &contribution.terms {
            self.postings
                .entry(term.clone())
                .or_default()
                .insert(contribution.pid.clone(), *tf);
        }
        self.docs.insert(contribution.pid.clone(), contribution);
    }

    fn remove(&mut self, pid: &Pid) {
        if let Some(old) = self.docs.remove(pid) {
            for term in old.terms.keys() {
                if let Some(posting) = self.postings.get_mut(term) {
                    posting.remove(pid);
                    if posting.is_empty() {
                        self.postings.remove(term);
                    }
                }
            }
        }
    }

    pub fn doc_count(&self) -> usize {
        self.docs.len()
    }

    pub fn document_frequency(&self, term: &str) -> usize {
        self.postings.get(term).map_or(0, |p| p.len())
    }

    fn avgdl(&self) -> f64 {
        if self.docs.is_empty() {
            return 0.0;
        }
        let total: u64 = self.docs.values().map(|d| d.length).sum();
        total as f64 / self.docs.len() as f64
    }

    /// Top-k documents by BM25. Empty query or empty index yields no hits.
    pub fn search(&self, query: &str, k: usize) -> Vec<SearchHit> {
        let query_terms: Vec<String> = tokenize(query).into_iter().map(|t| t.term).collect();
        if query_terms.is_empty() || self.docs.is_empty() || k == 0 {
            return Vec::new();
        }
        let n = self.docs.len() as f64;
        let avgdl = self.avgdl();

        let mut candidates: BTreeMap<&Pid, f64> = BTreeMap::new();
        for term in &query_terms {
            let Some(posting) = self.postings.get(term) else {
                continue;
            };
            let df = posting.len() as f64;
            let idf = (1.0 + (n - df + 0.5) / (df + 0.5)).ln();
            for (pid, tf) in posting {
                let doc_len = self.docs[pid].length as f64;
                let tf = *tf as f64;
                let norm = tf + K1 * (1.0 - B + B * doc_len / avgdl);
                *candidates.entry(pid).or_insert(0.0) += idf * tf * (K1 + 1.0) / norm;
            }
        }

        let mut hits: Vec<SearchHit> = candidates
            .into_iter()
            .map(|(pid, score)| SearchHit {
                pid: pid.clone(),
                score,
                snippet: self.snippet(pid, &query_terms),
            })
            .collect();
        // Descending score; ascending pid on ties (BTreeMap iteration is
        // already pid-ordered, and the sort is stable).
        hits.sort_by(|a, b| b.score.partial_cmp(&a.score).unwrap_or(std::cmp::Ordering::Equal));
        hits.truncate(k);
        hits
    }

    /// 80 characters centered on the first token matching the query.
    fn snippet(&self, pid: &Pid, query_terms: &[String]) -> String {
        let Some(doc) = self.docs.get(pid) else {
            return String::new();
        };
        let first = tokenize(&doc.text)
            .into_iter()
            .find(|t| query_terms.iter().any(|q| q == &t.term));
        let Some(tok) = first else {
            return String::new();
        };
        let mid = (tok.start + tok.end) / 2;
        let half = SNIPPET_WIDTH / 2;
        let mut start = mid.saturating_sub(half);
        let mut end = (mid + half).min(doc.text.len());
        while start > 0 && !doc.text.is_char_boundary(start) {
            start -= 1;
        }
        while end < doc.text.len() && !doc.text.is_char_boundary(end) {
            end += 1;
        }
        doc.text[start..end].to_string()
    }

    fn persist(&self) -> Result<()> {
        let Some(path) = &self.path else {
            return Ok(());
        };
        fs::create_dir_all(path.parent().expect("index path has parent"))?;
        let persisted = PersistedIndex {
            docs: self.docs.clone(),
        };
        fs::write(path, canon::to_canonical_json_line(&persisted)?)?;
        Ok(())
    }
}
