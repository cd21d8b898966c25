//! JSON graph description files.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::ir::{ComputationGraph, GraphError, NodeId, NodeRecord};

/// On-disk form of a graph: a node list in construction order plus optional
/// extra sections other tools may attach (the CLI stores a probe context here).
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct GraphFile {
    pub nodes: Vec<NodeRecord>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub outputs: BTreeMap<String, NodeId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probe: Option<serde_json::Value>,
}

#[derive(Debug, thiserror::Error)]
pub enum GraphFileError {
    #[error("malformed graph file: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

impl GraphFile {
    pub fn from_graph(g: &ComputationGraph) -> Self {
        GraphFile {
            nodes: g.nodes().to_vec(),
            outputs: g.outputs().clone(),
            probe: None,
        }
    }

    pub fn build(&self) -> Result<ComputationGraph, GraphError> {
        let mut g = ComputationGraph::new();
        for rec in &self.nodes {
            g.push_record(rec.clone())?;
        }
        for (role, id) in &self.outputs {
            g.set_output(role, *id)?;
        }
        Ok(g)
    }

    pub fn parse(text: &str) -> Result<Self, GraphFileError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("graph files always serialize")
    }
}

impl ComputationGraph {
    pub fn from_json(text: &str) -> Result<Self, GraphFileError> {
        Ok(GraphFile::parse(text)?.build()?)
    }

    pub fn to_json(&self) -> String {
        GraphFile::from_graph(self).to_json()
    }
}
