//! Dual-stream knowledge mining and trustworthy archiving engine.
//!
//! A local-first engine that enriches raw digital assets through four
//! stages — bitstream, content, knowledge, knowledge base — while a
//! parallel archiving stream captures provenance, guarantees that every
//! pipeline can be re-executed and verified, and packages assets into
//! self-describing, policy-managed archival units.

pub mod canon;
pub mod content;
pub mod engine;
pub mod error;
pub mod kea;
pub mod krr;
pub mod prov;
pub mod format;
pub mod kap;
pub mod store;

pub use engine::Engine;
pub use error::{Error, Result};
