//! Forward evaluation, reverse-mode gradients, optimization and checkpoints.

mod checkpoint;
mod exec;
mod loss;
mod optim;
mod params;

use thiserror::Error;

use crate::graph::{GraphError, NodeId};

pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, Checkpoint};
pub use exec::{backward, backward_from, forward, Feed, Gradients, Tape};
pub use loss::{cross_entropy, CLIP_PROBABILITY, NORMALIZATION_TOLERANCE};
pub use optim::{Adam, AdamConfig};
pub use params::{glorot_bound, ParamStore};

#[derive(Debug, Error)]
pub enum RuntimeError {
    #[error("node {node}: {detail}")]
    ShapeMismatch { node: NodeId, detail: String },
    #[error("parameter `{name}` has shape {expected:?}, got {got:?}")]
    ParameterShape {
        name: String,
        expected: Vec<usize>,
        got: Vec<usize>,
    },
    #[error("no value bound for `{0}`")]
    MissingBinding(String),
    #[error("node {node}{} produced a non-finite value", name.as_ref().map(|n| format!(" (`{n}`)")).unwrap_or_default())]
    NonFiniteValue { node: NodeId, name: Option<String> },
    #[error("loss node {0} is not a scalar")]
    NonScalarLoss(NodeId),
    #[error("distribution sums to {sum}, not 1")]
    NotNormalized { sum: f64 },
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
