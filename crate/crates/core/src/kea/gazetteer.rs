//! Gazetteer and extraction-pattern inputs, loaded from canonical JSON.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::content::tokenize;
use crate::error::Result;

/// One known surface form.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GazetteerEntry {
    /// Surface form as written; normalized on load.
    pub surface: String,
    /// Canonical label of the referent.
    pub label: String,
    /// Ontology class of the referent.
    pub class: String,
    /// Optional taxonomy concept id this entry annotates documents with.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub concept: Option<String>,
}

/// Deterministic lexicon mapping surface forms to (canonical label, class).
///
/// Surface forms are stored whitespace-normalized and case-folded; lookup
/// happens over normalized token sequences.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Gazetteer {
    pub entries: Vec<GazetteerEntry>,
    /// Honorific prefixes ("Dr.", "Prof.") skipped before matching.
    #[serde(default)]
    pub honorifics: Vec<String>,
}

impl Gazetteer {
    pub fn from_json(json: &str) -> Result<Self> {
        let mut gaz: Gazetteer = serde_json::from_str(json)?;
        for e in &mut gaz.entries {
            e.surface = normalize_surface(&e.surface);
        }
        Ok(gaz)
    }

    /// Normalized-surface lookup table: token-joined surface -> entry.
    /// Later duplicate surfaces are ignored (first entry wins).
    pub(crate) fn lookup(&self) -> BTreeMap<Vec<String>, &GazetteerEntry> {
        let mut map = BTreeMap::new();
        for e in &self.entries {
            let key: Vec<String> = e.surface.split(' ').map(str::to_string).collect();
            map.entry(key).or_insert(e);
        }
        map
    }

    /// Honorific prefixes as normalized token sequences.
    pub(crate) fn honorific_tokens(&self) -> Vec<Vec<String>> {
        self.honorifics
            .iter()
            .map(|h| tokenize(h).into_iter().map(|t| t.term).collect())
            .filter(|v: &Vec<String>| !v.is_empty())
            .collect()
    }

    /// Longest surface length in tokens (scan window bound).
    pub(crate) fn max_surface_tokens(&self) -> usize {
        self.entries
            .iter()
            .map(|e| e.surface.split(' ').count())
            .max()
            .unwrap_or(0)
    }

    /// Concept annotation for a canonical label, if any entry provides one.
    pub fn concept_for_label(&self, label: &str) -> Option<&str> {
        let norm = normalize_surface(label);
        self.entries
            .iter()
            .find(|e| normalize_surface(&e.label) == norm && e.concept.is_some())
            .and_then(|e| e.concept.as_deref())
    }
}

/// Whitespace-normalize and case-fold: normalized tokens joined by single
/// spaces. Used for gazetteer keys and fusion identity.
pub fn normalize_surface(s: &str) -> String {
    tokenize(s)
        .into_iter()
        .map(|t| t.term)
        .collect::<Vec<_>>()
        .join(" ")
}

/// A relation-extraction pattern: subject class, connective phrase,
/// object class (or attribute kind `Date` / `Measurement`).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExtractionPattern {
    pub subject_class: String,
    /// Connective phrase matched token-wise in the text between mentions.
    pub connective: String,
    pub object_class: String,
    /// Predicate label of the produced relation.
    pub predicate: String,
    #[serde(default = "default_pattern_confidence")]
    pub confidence: f64,
}

fn default_pattern_confidence() -> f64 {
    1.0
}

/// Pattern file payload.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct PatternSet {
    pub patterns: Vec<ExtractionPattern>,
}

impl PatternSet {
    pub fn from_json(json: &str) -> Result<Self> {
        Ok(serde_json::from_str(json)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn surfaces_normalize_on_load() {
        let gaz = Gazetteer::from_json(
            r#"{"entries":[{"surface":"  Project   X ","label":"Project X","class":"Project"}]}"#,
        )
        .unwrap();
        assert_eq!(gaz.entries[0].surface, "project x");
    }

    #[test]
    fn normalize_folds_case_and_whitespace() {
        assert_eq!(normalize_surface("Dr.  SMITH"), "dr smith");
        assert_eq!(normalize_surface(""), "");
    }

    #[test]
    fn pattern_confidence_defaults_to_one() {
        let ps = PatternSet::from_json(
            r#"{"patterns":[{"subject_class":"Person","connective":"leads","object_class":"Project","predicate":"leads"}]}"#,
        )
        .unwrap();
        assert_eq!(ps.patterns[0].confidence, 1.0);
    }
}
