//! The archiving stream's capture side: PROV-style derivation graphs for
//! every pipeline execution, a versioned registry of deterministic
//! operations, and the reproduction service that re-executes captured
//! traces and verifies output digests.

mod pipeline;
mod registry;
mod reproduce;
mod trace;

pub use pipeline::{PipelineSpec, StepInput, StepSpec};
pub use registry::{OperationFn, OperationRegistry};
pub use reproduce::{reproduce_trace, ReproductionReport, StepComparison};
pub use trace::{EdgeKind, NodeKind, ProvEdge, ProvNode, Trace};

/// Agent name recorded on every activity.
pub const AGENT_NAME: &str = "ikmf-engine";

/// Engine version recorded on the agent node.
pub const AGENT_VERSION: &str = env!("CARGO_PKG_VERSION");
