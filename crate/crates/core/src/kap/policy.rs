//! The machine-readable preservation-policy language.
//!
//! A policy is a conjunction of conditions over flattened descriptor
//! fields plus one action. Canonical-JSON policy files hold an array of
//! policies:
//!
//! ```json
//! [{"id": "tiff-to-png",
//!   "trigger": [{"field": "format", "op": "==", "value": "image/tiff"},
//!               {"field": "derivative:image/png", "op": "absent"}],
//!   "action": {"migrate": {"target": "image/png", "migrator_id": "tiff_to_png"}}}]
//! ```

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prov::OperationRegistry;
use crate::store::Pid;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConditionOp {
    #[serde(rename = "==")]
    Eq,
    #[serde(rename = "!=")]
    Ne,
    #[serde(rename = "exists")]
    Exists,
    #[serde(rename = "absent")]
    Absent,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Condition {
    pub field: String,
    pub op: ConditionOp,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<String>,
}

impl Condition {
    pub fn holds(&self, fields: &BTreeMap<String, String>) -> bool {
        let actual = fields.get(&self.field);
        match self.op {
            ConditionOp::Eq => actual.map(String::as_str) == self.value.as_deref(),
            ConditionOp::Ne => actual.is_some() && actual.map(String::as_str) != self.value.as_deref(),
            ConditionOp::Exists => actual.is_some(),
            ConditionOp::Absent => actual.is_none(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolicyAction {
    Migrate { target: String, migrator_id: String },
    Flag { reason: String },
    Replicate {},
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Policy {
    pub id: String,
    pub trigger: Vec<Condition>,
    pub action: PolicyAction,
}

impl Policy {
    pub fn validate(&self, registry: &OperationRegistry) -> Result<()> {
        if self.trigger.is_empty() {
            return Err(Error::Invalid(format!("policy {}: trigger must be non-empty", self.id)));
        }
        for cond in &self.trigger {
            let needs_value = matches!(cond.op, ConditionOp::Eq | ConditionOp::Ne);
            if needs_value && cond.value.is_none() {
                return Err(Error::Invalid(format!(
                    "policy {}: {:?} on {} needs a value",
                    self.id, cond.op, cond.field
                )));
            }
        }
        if let PolicyAction::Migrate { migrator_id, .. } = &self.action {
            let registered = registry
                .operations()
                .iter()
                .any(|(id, _)| id == migrator_id);
            if !registered {
                return Err(Error::UnregisteredOperation(format!(
                    "policy {}: migrator {migrator_id}",
                    self.id
                )));
            }
        }
        Ok(())
    }

    pub fn matches(&self, fields: &BTreeMap<String, String>) -> bool {
        self.trigger.iter().all(|c| c.holds(fields))
    }
}

/// A matched (asset, policy) pair awaiting execution.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlannedAction {
    pub pid: Pid,
    pub policy_id: String,
    pub action: PolicyAction,
}

/// Parse and validate a canonical-JSON policy file.
pub fn load_policies(json: &str, registry: &OperationRegistry) -> Result<Vec<Policy>> {
    let policies: Vec<Policy> = serde_json::from_str(json)?;
    for p in &policies {
        p.validate(registry)?;
    }
    Ok(policies)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fields(pairs: &[(&str, &str)]) -> BTreeMap<String, String> {
        pairs
            .iter()
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect()
    }

    fn tiff_policy() -> Policy {
        Policy {
            id: "tiff-to-png".into(),
            trigger: vec![
                Condition {
                    field: "format".into(),
                    op: ConditionOp::Eq,
                    value: Some("image/tiff".into()),
                },
                Condition {
                    field: "derivative:image/png".into(),
                    op: ConditionOp::Absent,
                    value: None,
                },
            ],
            action: PolicyAction::Migrate {
                target: "image/png".into(),
                migrator_id: "tiff_to_png".into(),
            },
        }
    }

    #[test]
    fn trigger_matches_and_suppresses() {
        let p = tiff_policy();
        assert!(p.matches(&fields(&[("format", "image/tiff")])));
        assert!(!p.matches(&fields(&[
            ("format", "image/tiff"),
            ("derivative:image/png", "true")
        ])));
        assert!(!p.matches(&fields(&[("format", "text/plain")])));
    }

    #[test]
    fn ne_requires_field_presence() {
        let cond = Condition {
            field: "format".into(),
            op: ConditionOp::Ne,
            value: Some("image/tiff".into()),
        };
        assert!(cond.holds(&fields(&[("format", "text/plain")])));
        assert!(!cond.holds(&fields(&[("format", "image/tiff")])));
        assert!(!cond.holds(&fields(&[])));
    }

    #[test]
    fn policy_json_round_trip() {
        let json = r#"[{"id":"flag-at-risk",
            "trigger":[{"field":"format_risk","op":"==","value":"at_risk"}],
            "action":{"flag":{"reason":"format at risk"}}}]"#;
        let mut registry = OperationRegistry::new();
        registry
            .register("tiff_to_png", "1.0.0", std::sync::Arc::new(|i, _| Ok(i.clone())))
            .unwrap();
        let policies = load_policies(json, &registry).unwrap();
        assert_eq!(policies.len(), 1);
        assert!(matches!(policies[0].action, PolicyAction::Flag { .. }));
    }

    #[test]
    fn migrate_policy_needs_registered_migrator() {
        let registry = OperationRegistry::new();
        let json = serde_json::to_string(&vec![tiff_policy()]).unwrap();
        assert!(matches!(
            load_policies(&json, &registry),
            Err(Error::UnregisteredOperation(_))
        ));
    }

    #[test]
    fn empty_trigger_rejected() {
        let registry = OperationRegistry::new();
        let json = r#"[{"id":"x","trigger":[],"action":{"replicate":{}}}]"#;
        assert!(matches!(
            load_policies(json, &registry),
            Err(Error::Invalid(_))
        ));
    }
}
