//! Versioned registry of deterministic in-process operations.
//!
//! An operation maps named input byte streams plus canonical-JSON
//! parameters to named output byte streams, purely and deterministically.
//! The (id, version) pair pins behavior: traces record it, and
//! reproduction refuses to substitute a different version.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::error::{Error, Result};

pub type OperationFn = Arc<
    dyn Fn(&BTreeMap<String, Vec<u8>>, &serde_json::Value) -> std::result::Result<BTreeMap<String, Vec<u8>>, String>
        + Send
        + Sync,
>;

#[derive(Default)]
pub struct OperationRegistry {
    ops: BTreeMap<(String, String), OperationFn>,
}

impl std::fmt::Debug for OperationRegistry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("OperationRegistry")
            .field("operations", &self.ops.keys().collect::<Vec<_>>())
            .finish()
    }
}

impl OperationRegistry {
    pub fn new() -> Self {
        OperationRegistry::default()
    }

    /// Register an implementation for (id, version). Re-registering an
    /// existing pair is an error: behavior pinned to a version must never
    /// change silently.
    pub fn register(
        &mut self,
        operation_id: &str,
        version: &str,
        implementation: OperationFn,
    ) -> Result<()> {
        let key = (operation_id.to_string(), version.to_string());
        if self.ops.contains_key(&key) {
            return Err(Error::DuplicateVersion(format!("{operation_id}@{version}")));
        }
        self.ops.insert(key, implementation);
        Ok(())
    }

    pub fn contains(&self, operation_id: &str, version: &str) -> bool {
        self.ops
            .contains_key(&(operation_id.to_string(), version.to_string()))
    }

    pub fn run(
        &self,
        operation_id: &str,
        version: &str,
        inputs: &BTreeMap<String, Vec<u8>>,
        parameters: &serde_json::Value,
    ) -> Result<BTreeMap<String, Vec<u8>>> {
        let f = self
            .ops
            .get(&(operation_id.to_string(), version.to_string()))
            .ok_or_else(|| Error::UnregisteredOperation(format!("{operation_id}@{version}")))?;
        f(inputs, parameters).map_err(|message| Error::StepFailure {
            step: format!("{operation_id}@{version}"),
            message,
        })
    }

    /// Registered (id, version) pairs, sorted.
    pub fn operations(&self) -> Vec<(String, String)> {
        self.ops.keys().cloned().collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn upper_op() -> OperationFn {
        Arc::new(|inputs, _params| {
            let mut out = BTreeMap::new();
            for (name, bytes) in inputs {
                out.insert(name.clone(), bytes.to_ascii_uppercase());
            }
            Ok(out)
        })
    }

    #[test]
    fn register_and_run() {
        let mut reg = OperationRegistry::new();
        reg.register("upper", "1.0.0", upper_op()).unwrap();
        let inputs = BTreeMap::from([("doc".to_string(), b"abc".to_vec())]);
        let out = reg.run("upper", "1.0.0", &inputs, &serde_json::Value::Null).unwrap();
        assert_eq!(out["doc"], b"ABC");
    }

    #[test]
    fn duplicate_version_rejected() {
        let mut reg = OperationRegistry::new();
        reg.register("upper", "1.0.0", upper_op()).unwrap();
        assert!(matches!(
            reg.register("upper", "1.0.0", upper_op()),
            Err(Error::DuplicateVersion(_))
        ));
        // A new version is fine.
        reg.register("upper", "2.0.0", upper_op()).unwrap();
    }

    #[test]
    fn unregistered_operation_errors() {
        let reg = OperationRegistry::new();
        let err = reg
            .run("ghost", "1.0.0", &BTreeMap::new(), &serde_json::Value::Null)
            .unwrap_err();
        assert!(matches!(err, Error::UnregisteredOperation(_)));
    }

    #[test]
    fn op_failure_carries_step() {
        let mut reg = OperationRegistry::new();
        reg.register(
            "boom",
            "1.0.0",
            Arc::new(|_, _| Err("it broke".to_string())),
        )
        .unwrap();
        let err = reg
            .run("boom", "1.0.0", &BTreeMap::new(), &serde_json::Value::Null)
            .unwrap_err();
        assert!(matches!(err, Error::StepFailure { .. }));
    }
}
