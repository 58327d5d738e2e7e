//! Structured knowledge bases agents consult for factual grounding.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::schema::read_jsonl;

/// One factual record: an entity, one of its attributes, the value, and a
/// pointer back to the evidence it was extracted from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KbEntry {
    pub entity: String,
    pub attribute: String,
    pub value: String,
    pub source_ref: String,
}

/// A named collection of entries. (entity, attribute) pairs are unique within
/// one knowledge base so lookups are unambiguous.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KnowledgeBase {
    id: String,
    entries: Vec<KbEntry>,
}

impl KnowledgeBase {
    pub fn new(id: impl Into<String>, entries: Vec<KbEntry>) -> Result<KnowledgeBase> {
        let id = id.into();
        if id.is_empty() {
            return Err(Error::Precondition("knowledge base id is empty".into()));
        }
        let mut seen = BTreeSet::new();
        for entry in &entries {
            if !seen.insert((entry.entity.clone(), entry.attribute.clone())) {
                return Err(Error::Precondition(format!(
                    "duplicate knowledge base key ({}, {})",
                    entry.entity, entry.attribute
                )));
            }
        }
        Ok(KnowledgeBase { id, entries })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn entries(&self) -> &[KbEntry] {
        &self.entries
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    /// Distinct entity names in sorted order.
    pub fn entities(&self) -> Vec<&str> {
        let set: BTreeSet<&str> = self.entries.iter().map(|e| e.entity.as_str()).collect();
        set.into_iter().collect()
    }

    /// Loads one knowledge base from a jsonl file of entries.
    pub fn load(id: impl Into<String>, path: impl AsRef<Path>) -> Result<KnowledgeBase> {
        let entries: Vec<KbEntry> = read_jsonl(path)?;
        KnowledgeBase::new(id, entries)
    }
}

/// Exact-match lookup: all entries for the entity, optionally narrowed to one
/// attribute. Results keep a deterministic (attribute-sorted) order.
pub fn kb_lookup<'a>(
    kb: &'a KnowledgeBase,
    entity: &str,
    attribute: Option<&str>,
) -> Vec<&'a KbEntry> {
    let mut hits: Vec<&KbEntry> = kb
        .entries
        .iter()
        .filter(|e| e.entity == entity)
        .filter(|e| attribute.map_or(true, |a| e.attribute == a))
        .collect();
    hits.sort_by(|a, b| a.attribute.cmp(&b.attribute));
    hits
}

/// Resolves the `kb_ref` strings carried by agent personas to loaded bases.
#[derive(Debug, Clone, Default)]
pub struct KbRegistry {
    bases: BTreeMap<String, KnowledgeBase>,
}

impl KbRegistry {
    pub fn new() -> KbRegistry {
        KbRegistry::default()
    }

    pub fn insert(&mut self, kb: KnowledgeBase) -> Result<()> {
        if self.bases.contains_key(kb.id()) {
            return Err(Error::Precondition(format!(
                "duplicate knowledge base id {}",
                kb.id()
            )));
        }
        self.bases.insert(kb.id().to_string(), kb);
        Ok(())
    }

    pub fn get(&self, kb_ref: &str) -> Option<&KnowledgeBase> {
        self.bases.get(kb_ref)
    }

    pub fn ids(&self) -> Vec<&str> {
        self.bases.keys().map(String::as_str).collect()
    }

    pub fn len(&self) -> usize {
        self.bases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bases.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_kb() -> KnowledgeBase {
        KnowledgeBase::new(
            "kb-auto",
            vec![
                KbEntry {
                    entity: "Model Y".into(),
                    attribute: "range_km".into(),
                    value: "688".into(),
                    source_ref: "src-001".into(),
                },
                KbEntry {
                    entity: "Model Y".into(),
                    attribute: "price".into(),
                    value: "263900".into(),
                    source_ref: "src-002".into(),
                },
                KbEntry {
                    entity: "Han EV".into(),
                    attribute: "range_km".into(),
                    value: "715".into(),
                    source_ref: "src-003".into(),
                },
            ],
        )
        .unwrap()
    }

    #[test]
    fn lookup_by_entity_returns_all_attributes_sorted() {
        let kb = sample_kb();
        let hits = kb_lookup(&kb, "Model Y", None);
        assert_eq!(hits.len(), 2);
        assert_eq!(hits[0].attribute, "price");
        assert_eq!(hits[1].attribute, "range_km");
    }

    #[test]
    fn lookup_with_attribute_narrows_to_one() {
        let kb = sample_kb();
        let hits = kb_lookup(&kb, "Han EV", Some("range_km"));
        assert_eq!(hits.len(), 1);
        assert_eq!(hits[0].value, "715");
    }

    #[test]
    fn unknown_entity_returns_empty() {
        let kb = sample_kb();
        assert!(kb_lookup(&kb, "Nonexistent", None).is_empty());
    }

    #[test]
    fn duplicate_entity_attribute_pair_is_rejected() {
        let dup = KbEntry {
            entity: "A".into(),
            attribute: "x".into(),
            value: "1".into(),
            source_ref: "s".into(),
        };
        let err = KnowledgeBase::new("kb", vec![dup.clone(), dup]).unwrap_err();
        assert!(err.to_string().contains("duplicate"));
    }

    #[test]
    fn registry_resolves_refs_and_rejects_duplicates() {
        let mut registry = KbRegistry::new();
        registry.insert(sample_kb()).unwrap();
        assert!(registry.get("kb-auto").is_some());
        assert!(registry.get("kb-missing").is_none());
        assert!(registry.insert(sample_kb()).is_err());
    }

    #[test]
    fn entities_are_distinct_and_sorted() {
        let kb = sample_kb();
        assert_eq!(kb.entities(), vec!["Han EV", "Model Y"]);
    }
}
