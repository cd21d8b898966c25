use std::collections::BTreeMap;
use std::sync::Arc;

use super::table::ExternalPredicateTable;

/// One member of an index set: a position inside the example's sequence and
/// the key used to look it up in data tables (typically the token surface).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexElement {
    pub pos: usize,
    pub key: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct IndexSet {
    pub elements: Vec<IndexElement>,
    /// Offsets such as `t+1` are only meaningful on ordered sets.
    pub ordered: bool,
}

impl IndexSet {
    pub fn ordered<K: Into<String>>(items: impl IntoIterator<Item = (usize, K)>) -> Self {
        IndexSet {
            elements: items
                .into_iter()
                .map(|(pos, key)| IndexElement { pos, key: key.into() })
                .collect(),
            ordered: true,
        }
    }

    pub fn unordered<K: Into<String>>(items: impl IntoIterator<Item = (usize, K)>) -> Self {
        IndexSet {
            ordered: false,
            ..Self::ordered(items)
        }
    }

    /// Positions `0..n` keyed by their decimal position.
    pub fn range(n: usize) -> Self {
        Self::ordered((0..n).map(|i| (i, i.to_string())))
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }
}

/// Per-example grounding inputs: the index sets quantifiers range over and
/// the data tables that back `data` predicates. Tables are shared, so cloning
/// a context is cheap and contexts can be sent across worker threads.
#[derive(Debug, Clone, Default)]
pub struct GroundingContext {
    pub index_sets: BTreeMap<String, IndexSet>,
    pub tables: BTreeMap<String, Arc<ExternalPredicateTable>>,
}

impl GroundingContext {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_set(mut self, name: impl Into<String>, set: IndexSet) -> Self {
        self.index_sets.insert(name.into(), set);
        self
    }

    pub fn with_table(mut self, name: impl Into<String>, table: Arc<ExternalPredicateTable>) -> Self {
        self.tables.insert(name.into(), table);
        self
    }
}
