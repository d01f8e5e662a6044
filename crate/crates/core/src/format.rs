//! Media-type identifier shared across storage, extraction, and preservation.

use serde::{Deserialize, Serialize};

/// A media type such as `text/plain` or `image/tiff`.
///
/// Values are drawn from the format registry; `application/octet-stream`
/// is the fallback for unidentifiable bitstreams.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FormatId(String);

impl FormatId {
    pub fn new(media_type: impl Into<String>) -> Self {
        FormatId(media_type.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn octet_stream() -> Self {
        FormatId::new(media::OCTET_STREAM)
    }
}

impl std::fmt::Display for FormatId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for FormatId {
    fn from(s: &str) -> Self {
        FormatId::new(s)
    }
}

/// Media-type constants for the formats the engine knows out of the box.
pub mod media {
    pub const TEXT_PLAIN: &str = "text/plain";
    pub const TEXT_CSV: &str = "text/csv";
    /// Minimal markdown-like format: `#` headings plus paragraphs.
    pub const TEXT_MARKDOWN_LITE: &str = "text/markdown-lite";
    pub const IMAGE_TIFF: &str = "image/tiff";
    pub const IMAGE_PNG: &str = "image/png";
    pub const APPLICATION_PDF: &str = "application/pdf";
    pub const APPLICATION_JSON: &str = "application/json";
    pub const OCTET_STREAM: &str = "application/octet-stream";
}
