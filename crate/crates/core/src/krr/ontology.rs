//! Ontology: classes, properties, and the axioms the reasoner compiles
//! into rules (subclass, subproperty, domain, range, disjointness).

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::krr::TYPE_PREDICATE;

/// Literal datatypes for data properties.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Datatype {
    String,
    Integer,
    Decimal,
    Date,
    Boolean,
}

impl Datatype {
    /// Does the lexical form parse as this datatype?
    pub fn validates(&self, lexical: &str) -> bool {
        match self {
            Datatype::String => true,
            Datatype::Integer => lexical.parse::<i64>().is_ok(),
            Datatype::Decimal => lexical.parse::<f64>().is_ok(),
            Datatype::Date => chrono::NaiveDate::parse_from_str(lexical, "%Y-%m-%d").is_ok(),
            Datatype::Boolean => matches!(lexical, "true" | "false"),
        }
    }
}

impl std::fmt::Display for Datatype {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            Datatype::String => "string",
            Datatype::Integer => "integer",
            Datatype::Decimal => "decimal",
            Datatype::Date => "date",
            Datatype::Boolean => "boolean",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PropertyKind {
    Object,
    Data,
}

/// Range of a property: a class for object properties, a datatype for
/// data properties.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PropertyRange {
    Class(String),
    Datatype(Datatype),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClassDef {
    pub name: String,
    #[serde(default)]
    pub superclasses: BTreeSet<String>,
    #[serde(default)]
    pub disjoint_with: BTreeSet<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PropertyDef {
    pub name: String,
    pub kind: PropertyKind,
    pub domain: String,
    pub range: PropertyRange,
    #[serde(default)]
    pub superproperties: BTreeSet<String>,
}

/// A validated ontology. Serializes as class and property lists, and
/// re-validates on deserialization.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(try_from = "OntologyFile", into = "OntologyFile")]
pub struct Ontology {
    classes: BTreeMap<String, ClassDef>,
    properties: BTreeMap<String, PropertyDef>,
}

/// On-disk shape of an ontology.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct OntologyFile {
    #[serde(default)]
    classes: Vec<ClassDef>,
    #[serde(default)]
    properties: Vec<PropertyDef>,
}

impl TryFrom<OntologyFile> for Ontology {
    type Error = Error;
    fn try_from(file: OntologyFile) -> Result<Self> {
        Ontology::new(file.classes, file.properties)
    }
}

impl From<Ontology> for OntologyFile {
    fn from(onto: Ontology) -> Self {
        OntologyFile {
            classes: onto.classes.into_values().collect(),
            properties: onto.properties.into_values().collect(),
        }
    }
}

impl Ontology {
    pub fn new(classes: Vec<ClassDef>, properties: Vec<PropertyDef>) -> Result<Self> {
        let mut onto = Ontology::default();
        for c in classes {
            if onto.classes.insert(c.name.clone(), c).is_some() {
                return Err(Error::Invalid("duplicate class".into()));
            }
        }
        for p in properties {
            if p.name == TYPE_PREDICATE {
                return Err(Error::Invalid(format!(
                    "property name {TYPE_PREDICATE:?} is reserved"
                )));
            }
            if onto.properties.insert(p.name.clone(), p).is_some() {
                return Err(Error::Invalid("duplicate property".into()));
            }
        }
        onto.validate()?;
        Ok(onto)
    }

    pub fn from_json(json: &str) -> Result<Self> {
        Ok(serde_json::from_str(json)?)
    }

    pub fn class(&self, name: &str) -> Option<&ClassDef> {
        self.classes.get(name)
    }

    pub fn property(&self, name: &str) -> Option<&PropertyDef> {
        self.properties.get(name)
    }

    pub fn classes(&self) -> impl Iterator<Item = &ClassDef> {
        self.classes.values()
    }

    pub fn properties(&self) -> impl Iterator<Item = &PropertyDef> {
        self.properties.values()
    }

    fn validate(&self) -> Result<()> {
        for c in self.classes.values() {
            for s in c.superclasses.iter().chain(&c.disjoint_with) {
                if !self.classes.contains_key(s) {
                    return Err(Error::UnknownClass(format!("{s} (referenced by {})", c.name)));
                }
            }
        }
        for p in self.properties.values() {
            if !self.classes.contains_key(&p.domain) {
                return Err(Error::UnknownClass(format!("{} (domain of {})", p.domain, p.name)));
            }
            match (&p.kind, &p.range) {
                (PropertyKind::Object, PropertyRange::Class(c)) => {
                    if !self.classes.contains_key(c) {
                        return Err(Error::UnknownClass(format!("{c} (range of {})", p.name)));
                    }
                }
                (PropertyKind::Data, PropertyRange::Datatype(_)) => {}
                (PropertyKind::Object, PropertyRange::Datatype(_)) => {
                    return Err(Error::Invalid(format!(
                        "object property {} must range over a class",
                        p.name
                    )))
                }
                (PropertyKind::Data, PropertyRange::Class(_)) => {
                    return Err(Error::Invalid(format!(
                        "data property {} must range over a datatype",
                        p.name
                    )))
                }
            }
            for s in &p.superproperties {
                let sup = self.properties.get(s).ok_or_else(|| {
                    Error::UndeclaredProperty(format!("{s} (superproperty of {})", p.name))
                })?;
                if sup.kind != p.kind {
                    return Err(Error::Invalid(format!(
                        "property {} and its superproperty {s} differ in kind",
                        p.name
                    )));
                }
            }
        }
        self.check_acyclic(
            "subclass",
            self.classes.keys(),
            |n| self.classes.get(n).map(|c| &c.superclasses),
        )?;
        self.check_acyclic(
            "subproperty",
            self.properties.keys(),
            |n| self.properties.get(n).map(|p| &p.superproperties),
        )?;
        Ok(())
    }

    fn check_acyclic<'a>(
        &self,
        what: &str,
        nodes: impl Iterator<Item = &'a String>,
        parents: impl Fn(&str) -> Option<&'a BTreeSet<String>>,
    ) -> Result<()> {
        for start in nodes {
            let mut seen = BTreeSet::new();
            let mut stack: Vec<&str> = parents(start)
                .map(|s| s.iter().map(String::as_str).collect())
                .unwrap_or_default();
            while let Some(n) = stack.pop() {
                if n == start {
                    return Err(Error::Cycle(format!("{what} cycle through {start}")));
                }
                if seen.insert(n) {
                    if let Some(ps) = parents(n) {
                        stack.extend(ps.iter().map(String::as_str));
                    }
                }
            }
        }
        Ok(())
    }

    /// Is `sub` equal to `sup` or a transitive subclass of it?
    pub fn is_subclass_of(&self, sub: &str, sup: &str) -> bool {
        if sub == sup {
            return true;
        }
        let mut stack = vec![sub];
        let mut seen = BTreeSet::new();
        while let Some(n) = stack.pop() {
            if !seen.insert(n.to_string()) {
                continue;
            }
            if let Some(c) = self.classes.get(n) {
                for s in &c.superclasses {
                    if s == sup {
                        return true;
                    }
                    stack.push(s);
                }
            }
        }
        false
    }

    /// Are the two classes declared disjoint (either direction)?
    pub fn are_disjoint(&self, a: &str, b: &str) -> bool {
        self.classes
            .get(a)
            .is_some_and(|c| c.disjoint_with.contains(b))
            || self
                .classes
                .get(b)
                .is_some_and(|c| c.disjoint_with.contains(a))
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub(crate) fn class(name: &str, supers: &[&str]) -> ClassDef {
        ClassDef {
            name: name.into(),
            superclasses: supers.iter().map(|s| s.to_string()).collect(),
            disjoint_with: BTreeSet::new(),
        }
    }

    pub(crate) fn object_property(name: &str, domain: &str, range: &str, supers: &[&str]) -> PropertyDef {
        PropertyDef {
            name: name.into(),
            kind: PropertyKind::Object,
            domain: domain.into(),
            range: PropertyRange::Class(range.into()),
            superproperties: supers.iter().map(|s| s.to_string()).collect(),
        }
    }

    #[test]
    fn valid_ontology_loads() {
        let onto = Ontology::new(
            vec![class("Person", &[]), class("Project", &[]), class("Agent", &[])],
            vec![
                object_property("worksOn", "Person", "Project", &[]),
                object_property("isPrincipalInvestigatorFor", "Person", "Project", &["worksOn"]),
            ],
        )
        .unwrap();
        assert!(onto.property("worksOn").is_some());
        assert!(onto.is_subclass_of("Person", "Person"));
    }

    #[test]
    fn subclass_cycle_rejected() {
        let err = Ontology::new(
            vec![class("A", &["B"]), class("B", &["A"])],
            vec![],
        )
        .unwrap_err();
        assert!(matches!(err, Error::Cycle(_)));
    }

    #[test]
    fn unknown_domain_rejected() {
        let err = Ontology::new(
            vec![class("Person", &[])],
            vec![object_property("worksOn", "Person", "Ghost", &[])],
        )
        .unwrap_err();
        assert!(matches!(err, Error::UnknownClass(_)));
    }

    #[test]
    fn data_property_needs_datatype_range() {
        let err = Ontology::new(
            vec![class("Project", &[])],
            vec![PropertyDef {
                name: "hasBudget".into(),
                kind: PropertyKind::Data,
                domain: "Project".into(),
                range: PropertyRange::Class("Project".into()),
                superproperties: BTreeSet::new(),
            }],
        )
        .unwrap_err();
        assert!(matches!(err, Error::Invalid(_)));
    }

    #[test]
    fn datatype_validation() {
        assert!(Datatype::Decimal.validates("12.5"));
        assert!(!Datatype::Decimal.validates("abc"));
        assert!(Datatype::Date.validates("2023-05-01"));
        assert!(!Datatype::Date.validates("2023-13-40"));
        assert!(Datatype::Integer.validates("-7"));
        assert!(!Datatype::Integer.validates("7.5"));
        assert!(Datatype::Boolean.validates("true"));
        assert!(!Datatype::Boolean.validates("yes"));
    }

    #[test]
    fn transitive_subclass_and_disjointness() {
        let mut person = class("Person", &["Agent"]);
        person.disjoint_with.insert("Organisation".into());
        let onto = Ontology::new(
            vec![
                class("Agent", &[]),
                person,
                class("Organisation", &["Agent"]),
                class("Professor", &["Person"]),
            ],
            vec![],
        )
        .unwrap();
        assert!(onto.is_subclass_of("Professor", "Agent"));
        assert!(!onto.is_subclass_of("Agent", "Professor"));
        assert!(onto.are_disjoint("Organisation", "Person"));
        assert!(!onto.are_disjoint("Person", "Agent"));
    }

    #[test]
    fn reserved_type_property_rejected() {
        let err = Ontology::new(
            vec![class("Person", &[])],
            vec![object_property("type", "Person", "Person", &[])],
        )
        .unwrap_err();
        assert!(matches!(err, Error::Invalid(_)));
    }
}
