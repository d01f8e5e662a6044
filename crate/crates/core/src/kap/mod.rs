//! The archiving stream's assembly and preservation activities:
//! PREMIS-style event log, 360-degree metadata aggregation, CERIF-like
//! research context, format-risk registry, policy-driven preservation
//! engine, and deterministic self-describing archival packages.

mod bag;
mod context;
mod descriptor;
mod events;
mod formats;
pub mod migrate;
mod policy;

pub use bag::{build_bag, parse_bag, validate_aip, AipCheck, BagFile, ValidationReport, BAGIT_DECLARATION, RO_CRATE_CONTEXT};
pub use context::{ContextEntity, ContextKind, ContextLink, ContextRegistry};
pub use descriptor::{ContextRef, DerivativeRef, MetadataDescriptor, SemanticBlock, TechnicalBlock};
pub use events::{EventLog, EventOutcome, EventType, PreservationEvent};
pub use formats::{FormatRecord, FormatRegistry, FormatRisk};
pub use policy::{
    load_policies, Condition, ConditionOp, PlannedAction, Policy, PolicyAction,
};
