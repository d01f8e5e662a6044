//! Shipped format migrators, registered as versioned operations.
//!
//! Migrators take a `source` input and produce a `migrated` output; both
//! are plain byte streams so they run as ordinary instrumented pipeline
//! steps. Image migrators are plugin slots only.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::content::csv_values;
use crate::prov::{OperationFn, OperationRegistry};
use crate::Result;

pub const CSV_TO_JSON: &str = "csv_to_json";
pub const LATIN1_TO_UTF8: &str = "latin1_to_utf8";
pub const MIGRATOR_VERSION: &str = "1.0.0";

/// Register the shipped migrators.
pub fn register_builtin_migrators(registry: &mut OperationRegistry) -> Result<()> {
    registry.register(CSV_TO_JSON, MIGRATOR_VERSION, csv_to_json_op())?;
    registry.register(LATIN1_TO_UTF8, MIGRATOR_VERSION, latin1_to_utf8_op())?;
    Ok(())
}

/// CSV (first row header) -> canonical JSON array of row objects.
pub fn csv_to_json_op() -> OperationFn {
    Arc::new(|inputs, _params| {
        let source = inputs
            .get("source")
            .ok_or_else(|| "missing input 'source'".to_string())?;
        let text = std::str::from_utf8(source).map_err(|e| format!("source is not UTF-8: {e}"))?;
        let rows = csv_values(text).map_err(|e| e.to_string())?;
        let mut out = Vec::new();
        let headers = rows.first().cloned().unwrap_or_default();
        for row in rows.iter().skip(1) {
            let mut obj = BTreeMap::new();
            for (i, value) in row.iter().enumerate() {
                let key = headers
                    .get(i)
                    .cloned()
                    .unwrap_or_else(|| format!("column_{i}"));
                obj.insert(key, value.clone());
            }
            out.push(obj);
        }
        let json =
            serde_json::to_string(&out).map_err(|e| format!("serialization failed: {e}"))?;
        Ok(BTreeMap::from([("migrated".to_string(), json.into_bytes())]))
    })
}

/// Latin-1 bytes -> UTF-8 (each byte maps to the same codepoint).
pub fn latin1_to_utf8_op() -> OperationFn {
    Arc::new(|inputs, _params| {
        let source = inputs
            .get("source")
            .ok_or_else(|| "missing input 'source'".to_string())?;
        let decoded: String = source.iter().map(|b| *b as char).collect();
        Ok(BTreeMap::from([(
            "migrated".to_string(),
            decoded.into_bytes(),
        )]))
    })
}
