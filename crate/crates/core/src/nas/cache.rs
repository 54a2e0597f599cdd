use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::space::{encode, ArchitectureEncoding};
use crate::evaluation::Metrics;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CachedEvaluation {
    pub objective: f64,
    pub fitness: f64,
    pub metrics: Metrics,
}

/// Canonical key to evaluation record. The first stored record for a key
/// wins; later stores for the same key are ignored.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct VisitedCache {
    entries: BTreeMap<String, CachedEvaluation>,
}

impl VisitedCache {
    pub fn lookup(&self, key: &str) -> Option<&CachedEvaluation> {
        self.entries.get(key)
    }

    pub fn store(&mut self, key: &str, record: CachedEvaluation) {
        self.entries.entry(key.to_owned()).or_insert(record);
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

pub fn memoized_lookup<'c>(
    cache: &'c VisitedCache,
    arch: &ArchitectureEncoding,
) -> Option<&'c CachedEvaluation> {
    cache.lookup(&encode(arch))
}

pub fn memoized_store(
    cache: &mut VisitedCache,
    arch: &ArchitectureEncoding,
    record: CachedEvaluation,
) {
    cache.store(&encode(arch), record);
}
