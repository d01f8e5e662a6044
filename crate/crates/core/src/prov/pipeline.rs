//! Pipeline specifications: named DAGs of registered operation steps.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::registry::OperationRegistry;
use crate::error::{Error, Result};

/// Where a step input comes from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StepInput {
    /// An existing asset.
    External { pid: String },
    /// A named output of an upstream step.
    Step { step: String, output: String },
}

/// One pipeline step: a pinned operation plus parameters and input wiring.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StepSpec {
    pub operation_id: String,
    pub operation_version: String,
    /// Canonical-JSON parameters, recorded verbatim in the trace.
    pub parameters: serde_json::Value,
    /// Input name -> source.
    pub inputs: BTreeMap<String, StepInput>,
}

/// A named DAG of steps.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct PipelineSpec {
    pub steps: BTreeMap<String, StepSpec>,
}

impl PipelineSpec {
    /// Validate structure against a registry: operations registered at
    /// their pinned versions, step references resolvable, DAG acyclic.
    pub fn validate(&self, registry: &OperationRegistry) -> Result<()> {
        for (name, step) in &self.steps {
            if !registry.contains(&step.operation_id, &step.operation_version) {
                return Err(Error::UnregisteredOperation(format!(
                    "{}@{} (step {name})",
                    step.operation_id, step.operation_version
                )));
            }
            for input in step.inputs.values() {
                if let StepInput::Step { step: upstream, .. } = input {
                    if !self.steps.contains_key(upstream) {
                        return Err(Error::MissingInput(format!(
                            "step {name} reads from unknown step {upstream}"
                        )));
                    }
                }
            }
        }
        self.topological_order()?;
        Ok(())
    }

    /// Steps in dependency order (deterministic: name-ordered within each
    /// layer thanks to the BTreeMap).
    pub fn topological_order(&self) -> Result<Vec<&str>> {
        let mut order: Vec<&str> = Vec::new();
        let mut done: BTreeSet<&str> = BTreeSet::new();
        let mut open: BTreeSet<&str> = BTreeSet::new();
        for name in self.steps.keys() {
            self.visit(name, &mut done, &mut open, &mut order)?;
        }
        Ok(order)
    }

    fn visit<'a>(
        &'a self,
        name: &'a str,
        done: &mut BTreeSet<&'a str>,
        open: &mut BTreeSet<&'a str>,
        order: &mut Vec<&'a str>,
    ) -> Result<()> {
        if done.contains(name) {
            return Ok(());
        }
        if !open.insert(name) {
            return Err(Error::Cycle(format!("pipeline cycle through step {name}")));
        }
        let step = self
            .steps
            .get(name)
            .ok_or_else(|| Error::MissingInput(format!("unknown step {name}")))?;
        for input in step.inputs.values() {
            if let StepInput::Step { step: upstream, .. } = input {
                self.visit(upstream, done, open, order)?;
            }
        }
        open.remove(name);
        done.insert(name);
        order.push(name);
        Ok(())
    }
}
