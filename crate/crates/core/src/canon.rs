//! Canonical JSON serialization.
//!
//! Every file the engine writes (asset records, index postings, knowledge
//! base snapshots, traces, bag metadata) uses one canonical form: UTF-8,
//! object keys sorted lexicographically, no insignificant whitespace.
//! Canonical form makes byte-equality a usable notion of state equality,
//! which the archival packaging and reproduction checks rely on.

use serde::Serialize;
use serde_json::Value;

use crate::error::Result;

/// Serialize to canonical JSON: sorted keys, compact, no trailing newline.
///
/// `serde_json`'s default `Map` is a `BTreeMap`, so converting through
/// [`Value`] sorts object keys regardless of struct field order.
pub fn to_canonical_json<T: Serialize>(value: &T) -> Result<String> {
    let v = serde_json::to_value(value)?;
    Ok(serde_json::to_string(&v)?)
}

/// Canonical JSON followed by a single `\n`, the on-disk file form.
pub fn to_canonical_json_line<T: Serialize>(value: &T) -> Result<String> {
    Ok(format!("{}\n", to_canonical_json(value)?))
}

/// Re-serialize an already-parsed value canonically.
pub fn canonicalize_value(value: &Value) -> String {
    // Value's map is BTreeMap-backed; Display is compact.
    serde_json::to_string(value).expect("serializing a Value cannot fail")
}

/// Current UTC time in RFC 3339 with second precision.
pub fn now_rfc3339() -> String {
    chrono::Utc::now().format("%Y-%m-%dT%H:%M:%SZ").to_string()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashMap;

    #[test]
    fn keys_are_sorted() {
        let mut m = HashMap::new();
        m.insert("zeta", 1);
        m.insert("alpha", 2);
        m.insert("mid", 3);
        assert_eq!(
            to_canonical_json(&m).unwrap(),
            r#"{"alpha":2,"mid":3,"zeta":1}"#
        );
    }

    #[test]
    fn parse_reserialize_is_identity() {
        let s = r#"{"a":[1,2.5,"x"],"b":{"c":true,"d":null}}"#;
        let v: Value = serde_json::from_str(s).unwrap();
        assert_eq!(canonicalize_value(&v), s);
    }
}
