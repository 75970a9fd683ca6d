use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KnowledgeEntry {
    pub concept: String,
    pub first_seen_ts: i64,
    pub count: u64,
}

/// A re-pairing of a known instance with a different concept.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Conflict {
    pub instance: String,
    pub previous: String,
    pub current: String,
}

/// Domain knowledge accumulated from explicit concept–instance pairs.
/// Maps each instance to exactly one concept; the latest explicit pairing
/// wins.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct KnowledgeDb {
    entries: BTreeMap<String, KnowledgeEntry>,
    #[serde(skip)]
    conflicts: Vec<Conflict>,
}

impl KnowledgeDb {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn concept_of(&self, instance: &str) -> Option<&str> {
        self.entries.get(instance).map(|e| e.concept.as_str())
    }

    pub fn get(&self, instance: &str) -> Option<&KnowledgeEntry> {
        self.entries.get(instance)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &KnowledgeEntry)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn record_explicit(&mut self, instance: &str, concept: &str, ts: i64) {
        match self.entries.get_mut(instance) {
            Some(entry) => {
                if entry.concept != concept {
                    self.conflicts.push(Conflict {
                        instance: instance.to_string(),
                        previous: entry.concept.clone(),
                        current: concept.to_string(),
                    });
                    entry.concept = concept.to_string();
                }
                entry.count += 1;
            }
            None => {
                self.entries.insert(
                    instance.to_string(),
                    KnowledgeEntry {
                        concept: concept.to_string(),
                        first_seen_ts: ts,
                        count: 1,
                    },
                );
            }
        }
    }

    /// Conflicting re-pairings seen since the last call.
    pub fn take_conflicts(&mut self) -> Vec<Conflict> {
        std::mem::take(&mut self.conflicts)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn store(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self)?;
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}
