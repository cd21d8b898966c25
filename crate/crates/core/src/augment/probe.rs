//! Serializable stand-in for one example's grounding context, stored in the
//! `probe` section of graph files so rules can be checked without a dataset.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::graph::{GraphFile, GraphFileError};

use super::context::{GroundingContext, IndexElement, IndexSet};
use super::table::{ExternalPredicateTable, TableError};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeContext {
    #[serde(default)]
    pub index_sets: BTreeMap<String, ProbeSet>,
    /// Table name → TSV path, relative to the graph file.
    #[serde(default)]
    pub tables: BTreeMap<String, PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeSet {
    pub ordered: bool,
    /// `(position, key)` pairs.
    pub elements: Vec<(usize, String)>,
}

impl ProbeContext {
    /// The probe section of a graph file; empty if the file has none.
    pub fn of_file(file: &GraphFile) -> Result<Self, GraphFileError> {
        match &file.probe {
            Some(v) => Ok(serde_json::from_value(v.clone())?),
            None => Ok(ProbeContext::default()),
        }
    }

    /// Describe `ctx`, with table `name` expected at `table_path(name)`.
    pub fn describe(ctx: &GroundingContext, mut table_path: impl FnMut(&str) -> PathBuf) -> Self {
        ProbeContext {
            index_sets: ctx
                .index_sets
                .iter()
                .map(|(name, set)| {
                    let elements = set.elements.iter().map(|e| (e.pos, e.key.clone())).collect();
                    (name.clone(), ProbeSet { ordered: set.ordered, elements })
                })
                .collect(),
            tables: ctx.tables.keys().map(|name| (name.clone(), table_path(name))).collect(),
        }
    }

    /// Rebuild the context, loading tables relative to `base`.
    pub fn load(&self, base: &Path) -> Result<GroundingContext, TableError> {
        let mut ctx = GroundingContext::new();
        for (name, set) in &self.index_sets {
            let elements = set
                .elements
                .iter()
                .map(|(pos, key)| IndexElement { pos: *pos, key: key.clone() })
                .collect();
            ctx = ctx.with_set(name.clone(), IndexSet { elements, ordered: set.ordered });
        }
        for (name, rel) in &self.tables {
            let table = ExternalPredicateTable::load(&base.join(rel), name, None)?;
            ctx = ctx.with_table(name.clone(), Arc::new(table));
        }
        Ok(ctx)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn context_round_trips_through_a_probe() {
        let dir = tempfile::tempdir().unwrap();
        let mut t = ExternalPredicateTable::new("noun", 1);
        t.insert(["cat"], 1.0);
        std::fs::write(dir.path().join("noun.tsv"), t.to_tsv()).unwrap();
        let ctx = GroundingContext::new()
            .with_set("T", IndexSet::ordered([(0, "cat"), (1, "sat")]))
            .with_set("C", IndexSet::unordered([(1, "sat")]))
            .with_table("noun", Arc::new(t));
        let probe = ProbeContext::describe(&ctx, |n| format!("{n}.tsv").into());
        let json = serde_json::to_value(&probe).unwrap();
        let back: ProbeContext = serde_json::from_value(json).unwrap();
        let loaded = back.load(dir.path()).unwrap();
        assert_eq!(loaded.index_sets, ctx.index_sets);
        assert_eq!(loaded.tables["noun"], ctx.tables["noun"]);
        assert!(matches!(back.load(Path::new("/nonexistent")), Err(TableError::Io { .. })));
    }
}
