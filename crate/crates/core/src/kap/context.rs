//! CERIF-like research context: core entities (Project, Person,
//! Organisation, Publication, Dataset) connected by typed, optionally
//! time-bounded links.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::canon;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ContextKind {
    Project,
    Person,
    Organisation,
    Publication,
    Dataset,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextEntity {
    pub id: String,
    pub kind: ContextKind,
    #[serde(default)]
    pub attributes: BTreeMap<String, String>,
}

/// A typed relationship between context entities, e.g.
/// Person is-author-of Publication.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContextLink {
    pub from: String,
    pub to: String,
    pub role: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub valid_from: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub valid_to: Option<String>,
}

/// Registry persisted as `context.json`.
#[derive(Debug, Default)]
pub struct ContextRegistry {
    path: Option<PathBuf>,
    entities: BTreeMap<String, ContextEntity>,
    links: Vec<ContextLink>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
struct PersistedContext {
    entities: Vec<ContextEntity>,
    links: Vec<ContextLink>,
}

impl ContextRegistry {
    pub fn in_memory() -> Self {
        ContextRegistry::default()
    }

    pub fn load(root: &Path) -> Result<Self> {
        let path = root.join("context.json");
        let mut reg = ContextRegistry {
            path: Some(path.clone()),
            ..ContextRegistry::default()
        };
        if path.exists() {
            let persisted: PersistedContext = serde_json::from_str(&fs::read_to_string(&path)?)?;
            for e in persisted.entities {
                reg.entities.insert(e.id.clone(), e);
            }
            reg.links = persisted.links;
        }
        Ok(reg)
    }

    pub fn register_entity(&mut self, entity: ContextEntity) -> Result<String> {
        if let Some(existing) = self.entities.get(&entity.id) {
            if existing == &entity {
                return Ok(entity.id); // identical re-registration is a no-op
            }
            return Err(Error::Invalid(format!(
                "context entity {} already registered with different content",
                entity.id
            )));
        }
        let id = entity.id.clone();
        self.entities.insert(id.clone(), entity);
        self.persist()?;
        Ok(id)
    }

    /// Store a link. Endpoints must exist; identical duplicates collapse.
    pub fn link(&mut self, link: ContextLink) -> Result<()> {
        if link.role.trim().is_empty() {
            return Err(Error::Invalid("link role must be non-empty".into()));
        }
        for end in [&link.from, &link.to] {
            if !self.entities.contains_key(end) {
                return Err(Error::DanglingLink(end.clone()));
            }
        }
        if !self.links.contains(&link) {
            self.links.push(link);
            self.persist()?;
        }
        Ok(())
    }

    pub fn entity(&self, id: &str) -> Option<&ContextEntity> {
        self.entities.get(id)
    }

    pub fn by_kind(&self, kind: ContextKind) -> Vec<&ContextEntity> {
        self.entities.values().filter(|e| e.kind == kind).collect()
    }

    /// Links touching an entity, from either endpoint.
    pub fn neighborhood(&self, id: &str) -> Vec<&ContextLink> {
        self.links
            .iter()
            .filter(|l| l.from == id || l.to == id)
            .collect()
    }

    /// Entities holding a given attribute value (e.g. Dataset records
    /// carrying a `pid` attribute).
    pub fn with_attribute(&self, key: &str, value: &str) -> Vec<&ContextEntity> {
        self.entities
            .values()
            .filter(|e| e.attributes.get(key).map(String::as_str) == Some(value))
            .collect()
    }

    fn persist(&self) -> Result<()> {
        if let Some(path) = &self.path {
            let persisted = PersistedContext {
                entities: self.entities.values().cloned().collect(),
                links: self.links.clone(),
            };
            fs::write(path, canon::to_canonical_json_line(&persisted)?)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn person(id: &str) -> ContextEntity {
        ContextEntity {
            id: id.into(),
            kind: ContextKind::Person,
            attributes: BTreeMap::new(),
        }
    }

    fn publication(id: &str) -> ContextEntity {
        ContextEntity {
            id: id.into(),
            kind: ContextKind::Publication,
            attributes: BTreeMap::new(),
        }
    }

    #[test]
    fn author_link_retrievable_from_both_endpoints() {
        let mut reg = ContextRegistry::in_memory();
        reg.register_entity(person("p1")).unwrap();
        reg.register_entity(publication("pub1")).unwrap();
        reg.link(ContextLink {
            from: "p1".into(),
            to: "pub1".into(),
            role: "is-author-of".into(),
            valid_from: None,
            valid_to: None,
        })
        .unwrap();
        assert_eq!(reg.neighborhood("p1").len(), 1);
        assert_eq!(reg.neighborhood("pub1").len(), 1);
        assert_eq!(reg.neighborhood("p1")[0].role, "is-author-of");
    }

    #[test]
    fn dangling_link_rejected() {
        let mut reg = ContextRegistry::in_memory();
        reg.register_entity(person("p1")).unwrap();
        let err = reg
            .link(ContextLink {
                from: "p1".into(),
                to: "ghost".into(),
                role: "knows".into(),
                valid_from: None,
                valid_to: None,
            })
            .unwrap_err();
        assert!(matches!(err, Error::DanglingLink(_)));
    }

    #[test]
    fn duplicate_link_is_idempotent() {
        let mut reg = ContextRegistry::in_memory();
        reg.register_entity(person("p1")).unwrap();
        reg.register_entity(publication("pub1")).unwrap();
        let link = ContextLink {
            from: "p1".into(),
            to: "pub1".into(),
            role: "is-author-of".into(),
            valid_from: None,
            valid_to: None,
        };
        reg.link(link.clone()).unwrap();
        reg.link(link).unwrap();
        assert_eq!(reg.neighborhood("p1").len(), 1);
    }

    #[test]
    fn queries_by_kind_and_attribute() {
        let mut reg = ContextRegistry::in_memory();
        let mut ds = ContextEntity {
            id: "ds1".into(),
            kind: ContextKind::Dataset,
            attributes: BTreeMap::new(),
        };
        ds.attributes.insert("pid".into(), "ikmf:abc".into());
        reg.register_entity(ds).unwrap();
        reg.register_entity(person("p1")).unwrap();
        assert_eq!(reg.by_kind(ContextKind::Dataset).len(), 1);
        assert_eq!(reg.with_attribute("pid", "ikmf:abc")[0].id, "ds1");
        assert!(reg.with_attribute("pid", "ikmf:zzz").is_empty());
    }
}
