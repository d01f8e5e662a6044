//! Crate-wide error type.
//!
//! Every fallible public operation returns [`Error`]. The [`Error::kind`]
//! string is the stable machine-parsable identifier used by the CLI's
//! `ERROR <kind>:` output contract.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("not found: {0}")]
    NotFound(String),

    /// Stored bytes no longer hash to their content address.
    #[error("integrity error: {0}")]
    Integrity(String),

    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),

    #[error("decode error: {0}")]
    Decode(String),

    #[error("undeclared property: {0}")]
    UndeclaredProperty(String),

    #[error("type mismatch: {0}")]
    TypeMismatch(String),

    #[error("unknown class: {0}")]
    UnknownClass(String),

    #[error("cycle detected: {0}")]
    Cycle(String),

    #[error("unbound projection variable: {0}")]
    UnboundProjection(String),

    #[error("operation already registered: {0}")]
    DuplicateVersion(String),

    #[error("unregistered operation: {0}")]
    UnregisteredOperation(String),

    #[error("missing pipeline input: {0}")]
    MissingInput(String),

    #[error("step {step} failed: {message}")]
    StepFailure { step: String, message: String },

    #[error("operation version missing from registry: {0}")]
    MissingOperationVersion(String),

    #[error("input blob no longer resolvable: {0}")]
    MissingInputBlob(String),

    #[error("context link endpoint missing: {0}")]
    DanglingLink(String),

    #[error("unknown format: {0}")]
    UnknownFormat(String),

    #[error("migrator failed: {0}")]
    MigratorFailure(String),

    /// Malformed rule, pattern, policy, or data file.
    #[error("parse error: {0}")]
    Parse(String),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("storage error: {0}")]
    Storage(String),

    #[error("store is locked by another writer: {0}")]
    Locked(String),
}

impl Error {
    /// Stable kind identifier for machine-parsable error lines.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::NotFound(_) => "NotFound",
            Error::Integrity(_) => "IntegrityError",
            Error::UnsupportedFormat(_) => "UnsupportedFormat",
            Error::Decode(_) => "DecodeError",
            Error::UndeclaredProperty(_) => "UndeclaredProperty",
            Error::TypeMismatch(_) => "TypeMismatch",
            Error::UnknownClass(_) => "UnknownClass",
            Error::Cycle(_) => "CycleError",
            Error::UnboundProjection(_) => "UnboundProjection",
            Error::DuplicateVersion(_) => "DuplicateVersion",
            Error::UnregisteredOperation(_) => "UnregisteredOperation",
            Error::MissingInput(_) => "MissingInput",
            Error::StepFailure { .. } => "StepFailure",
            Error::MissingOperationVersion(_) => "MissingOperationVersion",
            Error::MissingInputBlob(_) => "MissingInputBlob",
            Error::DanglingLink(_) => "DanglingLink",
            Error::UnknownFormat(_) => "UnknownFormat",
            Error::MigratorFailure(_) => "MigratorFailure",
            Error::Parse(_) => "ParseError",
            Error::Invalid(_) => "InvalidInput",
            Error::Storage(_) => "StorageError",
            Error::Locked(_) => "StoreLocked",
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Storage(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}
