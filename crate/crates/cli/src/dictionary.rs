//! Stable mapping from human-entered term strings to term ids.

use std::collections::BTreeMap;
use std::path::Path;

use evoindex::index::TermId;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TermDictionary {
    ids: BTreeMap<String, u32>,
    next: u32,
}

impl TermDictionary {
    pub fn new() -> Self {
        Self::default()
    }

    /// Terms are matched after trimming and lower-casing.
    pub fn normalize(term: &str) -> String {
        term.trim().to_lowercase()
    }

    pub fn get(&self, term: &str) -> Option<TermId> {
        self.ids.get(&Self::normalize(term)).map(|id| TermId(*id))
    }

    /// Returns the id of `term`, allocating one if needed. The flag is true
    /// for a new allocation.
    pub fn intern(&mut self, term: &str) -> (TermId, bool) {
        let key = Self::normalize(term);
        if let Some(id) = self.ids.get(&key) {
            return (TermId(*id), false);
        }
        let id = self.next;
        self.ids.insert(key, id);
        self.next += 1;
        (TermId(id), true)
    }

    /// Binds `term` to a fixed id. Later allocations skip past it.
    pub fn bind(&mut self, term: &str, id: TermId) {
        self.ids.insert(Self::normalize(term), id.0);
        self.next = self.next.max(id.0 + 1);
    }

    pub fn name_of(&self, id: TermId) -> Option<&str> {
        self.ids.iter().find(|(_, v)| **v == id.0).map(|(k, _)| k.as_str())
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, TermId)> {
        self.ids.iter().map(|(k, v)| (k.as_str(), TermId(*v)))
    }

    pub fn load(path: &Path) -> std::io::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))
    }

    pub fn save(&self, path: &Path) -> std::io::Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(std::io::Error::other)?;
        std::fs::write(path, text)
    }
}
