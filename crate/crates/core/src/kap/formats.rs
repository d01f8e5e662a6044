//! Format registry: signatures for identification, risk levels from the
//! technology watch, and migration routes.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::canon;
use crate::error::{Error, Result};
use crate::format::{media, FormatId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FormatRisk {
    Supported,
    AtRisk,
    Obsolete,
}

/// One registered format.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FormatRecord {
    pub format: FormatId,
    /// Magic-byte prefix, lowercase hex, when the format is identifiable
    /// from file headers.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub signature: Option<String>,
    pub risk: FormatRisk,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub migration_target: Option<FormatId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub migrator_id: Option<String>,
}

/// The registry, persisted as `formats.json`. Seeded with the formats the
/// engine knows out of the box; the manual risk hook stands in for an
/// external technology-watch feed.
#[derive(Debug)]
pub struct FormatRegistry {
    path: Option<PathBuf>,
    records: Vec<FormatRecord>,
}

impl FormatRegistry {
    pub fn defaults() -> Vec<FormatRecord> {
        let plain = |format: &str| FormatRecord {
            format: FormatId::new(format),
            signature: None,
            risk: FormatRisk::Supported,
            migration_target: None,
            migrator_id: None,
        };
        let signed = |format: &str, sig: &str| FormatRecord {
            signature: Some(sig.to_string()),
            ..plain(format)
        };
        vec![
            plain(media::TEXT_PLAIN),
            plain(media::TEXT_CSV),
            plain(media::TEXT_MARKDOWN_LITE),
            plain(media::APPLICATION_JSON),
            signed(media::IMAGE_TIFF, "49492a00"),
            signed(media::IMAGE_PNG, "89504e47"),
            signed(media::APPLICATION_PDF, "25504446"),
            plain(media::OCTET_STREAM),
        ]
    }

    pub fn in_memory() -> Self {
        FormatRegistry {
            path: None,
            records: Self::defaults(),
        }
    }

    pub fn load(root: &Path) -> Result<Self> {
        let path = root.join("formats.json");
        let records = if path.exists() {
            serde_json::from_str(&fs::read_to_string(&path)?)?
        } else {
            Self::defaults()
        };
        let reg = FormatRegistry {
            path: Some(path),
            records,
        };
        reg.validate()?;
        Ok(reg)
    }

    fn validate(&self) -> Result<()> {
        for r in &self.records {
            if r.risk != FormatRisk::Supported
                && r.migration_target.is_some()
                && r.migrator_id.is_none()
            {
                return Err(Error::Invalid(format!(
                    "format {} has a migration target but no migrator",
                    r.format
                )));
            }
            if let Some(sig) = &r.signature {
                if hex::decode(sig).is_err() {
                    return Err(Error::Invalid(format!(
                        "format {} signature is not valid hex",
                        r.format
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn get(&self, format: &FormatId) -> Option<&FormatRecord> {
        self.records.iter().find(|r| &r.format == format)
    }

    pub fn contains(&self, format: &FormatId) -> bool {
        self.get(format).is_some()
    }

    pub fn records(&self) -> &[FormatRecord] {
        &self.records
    }

    /// (format, magic bytes) pairs in registry order, for the sniffer.
    pub fn signatures(&self) -> Vec<(FormatId, Vec<u8>)> {
        self.records
            .iter()
            .filter_map(|r| {
                r.signature
                    .as_ref()
                    .and_then(|s| hex::decode(s).ok())
                    .map(|magic| (r.format.clone(), magic))
            })
            .collect()
    }

    /// Register a new format (idempotent when the record is identical).
    pub fn register(&mut self, record: FormatRecord) -> Result<()> {
        if let Some(existing) = self.get(&record.format) {
            if canon::to_canonical_json(existing)? == canon::to_canonical_json(&record)? {
                return Ok(());
            }
            return Err(Error::Invalid(format!(
                "format {} already registered with a different record",
                record.format
            )));
        }
        self.records.push(record);
        self.validate()?;
        self.persist()
    }

    /// Update the risk assessment of a registered format.
    pub fn set_risk(&mut self, format: &FormatId, risk: FormatRisk) -> Result<()> {
        let record = self
            .records
            .iter_mut()
            .find(|r| &r.format == format)
            .ok_or_else(|| Error::UnknownFormat(format.to_string()))?;
        record.risk = risk;
        self.persist()
    }

    /// Set the migration route for a format.
    pub fn set_migration(
        &mut self,
        format: &FormatId,
        target: FormatId,
        migrator_id: &str,
    ) -> Result<()> {
        let record = self
            .records
            .iter_mut()
            .find(|r| &r.format == format)
            .ok_or_else(|| Error::UnknownFormat(format.to_string()))?;
        record.migration_target = Some(target);
        record.migrator_id = Some(migrator_id.to_string());
        self.persist()
    }

    pub fn risk_of(&self, format: &FormatId) -> FormatRisk {
        self.get(format).map_or(FormatRisk::Supported, |r| r.risk)
    }

    fn persist(&self) -> Result<()> {
        if let Some(path) = &self.path {
            fs::write(path, canon::to_canonical_json_line(&self.records)?)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_identify_tiff() {
        let reg = FormatRegistry::in_memory();
        let sigs = reg.signatures();
        let id = crate::content::identify_format(&[0x49, 0x49, 0x2a, 0x00, 1, 2], &sigs);
        assert_eq!(id.as_str(), media::IMAGE_TIFF);
    }

    #[test]
    fn set_risk_unknown_format_errors() {
        let mut reg = FormatRegistry::in_memory();
        assert!(matches!(
            reg.set_risk(&FormatId::new("image/hologram"), FormatRisk::AtRisk),
            Err(Error::UnknownFormat(_))
        ));
        reg.set_risk(&FormatId::new(media::IMAGE_TIFF), FormatRisk::AtRisk).unwrap();
        assert_eq!(reg.risk_of(&FormatId::new(media::IMAGE_TIFF)), FormatRisk::AtRisk);
    }

    #[test]
    fn persists_and_reloads() {
        let dir = tempfile::tempdir().unwrap();
        {
            let mut reg = FormatRegistry::load(dir.path()).unwrap();
            reg.set_risk(&FormatId::new(media::IMAGE_TIFF), FormatRisk::Obsolete).unwrap();
            reg.set_migration(
                &FormatId::new(media::IMAGE_TIFF),
                FormatId::new(media::IMAGE_PNG),
                "tiff_to_png",
            )
            .unwrap();
        }
        let reg = FormatRegistry::load(dir.path()).unwrap();
        let tiff = reg.get(&FormatId::new(media::IMAGE_TIFF)).unwrap();
        assert_eq!(tiff.risk, FormatRisk::Obsolete);
        assert_eq!(tiff.migrator_id.as_deref(), Some("tiff_to_png"));
    }

    #[test]
    fn duplicate_registration_must_be_identical() {
        let mut reg = FormatRegistry::in_memory();
        let record = FormatRecord {
            format: FormatId::new("audio/wav"),
            signature: Some("52494646".into()),
            risk: FormatRisk::Supported,
            migration_target: None,
            migrator_id: None,
        };
        reg.register(record.clone()).unwrap();
        reg.register(record.clone()).unwrap(); // identical: fine
        let changed = FormatRecord {
            risk: FormatRisk::AtRisk,
            ..record
        };
        assert!(reg.register(changed).is_err());
    }
}
