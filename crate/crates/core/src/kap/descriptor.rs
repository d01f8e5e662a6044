//! The 360-degree metadata descriptor: technical, semantic, and
//! contextual metadata plus the event trail, aggregated per asset.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::formats::FormatRisk;
use crate::store::Pid;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TechnicalBlock {
    pub format: String,
    pub format_risk: FormatRisk,
    pub size: u64,
    /// Always equals the asset's blob digest.
    pub digest: String,
    pub stage: String,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct SemanticBlock {
    /// Knowledge-graph entities whose assertions cite this asset.
    pub entities: Vec<String>,
    /// Concept annotations with confidence.
    pub concepts: BTreeMap<String, f64>,
}

/// One research-context attachment reached from the asset's Dataset
/// record, one hop out.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ContextRef {
    pub entity: String,
    pub kind: String,
    pub role: String,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DerivativeRef {
    pub pid: Pid,
    pub format: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetadataDescriptor {
    pub pid: Pid,
    pub technical: TechnicalBlock,
    pub semantic: SemanticBlock,
    pub contextual: Vec<ContextRef>,
    /// Event ids from the preservation log, in order.
    pub events: Vec<u64>,
    /// Direct derivatives (migration copies, extraction products).
    pub derivatives: Vec<DerivativeRef>,
}

impl MetadataDescriptor {
    /// Flatten to the field paths the policy language evaluates.
    ///
    /// Keys: `pid`, `format`, `format_risk`, `size`, `digest`, `stage`,
    /// `events.count`, `entity:<id>`, `concept:<id>`, `derivative:<format>`,
    /// and `context:<role>:<entity>` (the latter four mapping to "true" or
    /// a confidence).
    pub fn flatten(&self) -> BTreeMap<String, String> {
        let mut out = BTreeMap::new();
        out.insert("pid".into(), self.pid.to_string());
        out.insert("format".into(), self.technical.format.clone());
        out.insert(
            "format_risk".into(),
            serde_json::to_value(self.technical.format_risk)
                .expect("risk serializes")
                .as_str()
                .expect("risk is a string")
                .to_string(),
        );
        out.insert("size".into(), self.technical.size.to_string());
        out.insert("digest".into(), self.technical.digest.clone());
        out.insert("stage".into(), self.technical.stage.clone());
        out.insert("events.count".into(), self.events.len().to_string());
        for e in &self.semantic.entities {
            out.insert(format!("entity:{e}"), "true".into());
        }
        for (c, conf) in &self.semantic.concepts {
            out.insert(format!("concept:{c}"), format!("{conf}"));
        }
        for d in &self.derivatives {
            out.insert(format!("derivative:{}", d.format), "true".into());
        }
        for c in &self.contextual {
            out.insert(format!("context:{}:{}", c.role, c.entity), "true".into());
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flatten_exposes_policy_fields() {
        let d = MetadataDescriptor {
            pid: Pid::parse("ikmf:000000000000000000000000000000ff").unwrap(),
            technical: TechnicalBlock {
                format: "image/tiff".into(),
                format_risk: FormatRisk::AtRisk,
                size: 10,
                digest: "d".repeat(64),
                stage: "data".into(),
            },
            semantic: SemanticBlock::default(),
            contextual: vec![ContextRef {
                entity: "proj1".into(),
                kind: "Project".into(),
                role: "is-output-of".into(),
            }],
            events: vec![1, 4],
            derivatives: vec![DerivativeRef {
                pid: Pid::parse("ikmf:000000000000000000000000000000fe").unwrap(),
                format: "image/png".into(),
            }],
        };
        let flat = d.flatten();
        assert_eq!(flat["format"], "image/tiff");
        assert_eq!(flat["format_risk"], "at_risk");
        assert_eq!(flat["derivative:image/png"], "true");
        assert_eq!(flat["events.count"], "2");
        assert_eq!(flat["context:is-output-of:proj1"], "true");
    }
}
