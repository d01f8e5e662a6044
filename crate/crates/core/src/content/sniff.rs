//! Format identification from file headers.

use crate::format::{media, FormatId};

/// Identify the format of raw bytes.
///
/// Signatures (magic-byte prefixes, first match wins) come from the format
/// registry. When no signature matches, fall back to heuristics: valid
/// UTF-8 with a comma-consistent line structure is `text/csv`, any other
/// valid UTF-8 is `text/plain`, everything else `application/octet-stream`.
pub fn identify_format(bytes: &[u8], signatures: &[(FormatId, Vec<u8>)]) -> FormatId {
    for (format, magic) in signatures {
        if !magic.is_empty() && bytes.starts_with(magic) {
            return format.clone();
        }
    }
    match std::str::from_utf8(bytes) {
        Ok(text) => {
            if looks_like_csv(text) {
                FormatId::new(media::TEXT_CSV)
            } else {
                FormatId::new(media::TEXT_PLAIN)
            }
        }
        Err(_) => FormatId::octet_stream(),
    }
}

/// At least two non-empty lines, all with the same comma count >= 1.
fn looks_like_csv(text: &str) -> bool {
    let lines: Vec<&str> = text.lines().filter(|l| !l.trim().is_empty()).collect();
    if lines.len() < 2 {
        return false;
    }
    let commas = lines[0].matches(',').count();
    commas >= 1 && lines.iter().all(|l| l.matches(',').count() == commas)
}
