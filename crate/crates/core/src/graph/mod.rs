//! Computation-graph IR: nodes, named neurons, reachability and cyclicity.

mod ir;
mod json;
mod reach;

pub use ir::{infer_shape, ComputationGraph, GraphError, NodeId, NodeRecord, Op, Scale};
pub use json::{GraphFile, GraphFileError};
pub use reach::{Cyclicity, Reachability};
