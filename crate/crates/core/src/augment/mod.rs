//! Rule-driven network augmentation.
//!
//! Statements are grounded on one example ([`Grounder`]) into scalar
//! constraints, and the network is rewritten ([`augment_pipeline`]) so that
//! every rule target gets a constrained copy whose pre-activation is shifted
//! by the scaled distance of each satisfied antecedent.

mod context;
mod ground;
mod probe;
mod rewrite;
mod table;

use thiserror::Error;

use crate::graph::GraphError;
use crate::rules::NormalizeError;
use crate::soft_logic::DistanceError;

pub use context::{GroundingContext, IndexElement, IndexSet};
pub use probe::{ProbeContext, ProbeSet};
pub use ground::{
    ground, statement_cyclicity, AuxBody, AuxiliaryLayerSpec, GroundedConstraint, Grounder, Source,
};
pub use rewrite::{
    apply_auxiliary, apply_constraints, augment_pipeline, primed, program_cyclicity, AugmentReport,
    Augmented, StatementReport, HARD_MARGIN,
};
pub use table::{ExternalPredicateTable, TableError};

#[derive(Debug, Error)]
pub enum AugmentError {
    #[error("line {line}: rule is cyclic: `{consequent}` feeds `{antecedent}`")]
    CyclicRule {
        line: usize,
        consequent: String,
        antecedent: String,
    },
    #[error("line {line}: consequent `{predicate}` is not bound to a neuron")]
    UnsupportedConsequent { line: usize, predicate: String },
    #[error("line {line}: unknown predicate `{name}`")]
    UnknownPredicate { line: usize, name: String },
    #[error("line {line}: unknown index set `{name}`")]
    UnknownIndexSet { line: usize, name: String },
    #[error("line {line}: variable `{var}` is not quantified")]
    UnboundVariable { line: usize, var: String },
    #[error("line {line}: offset on `{var}`, whose index set is unordered")]
    OffsetOnUnordered { line: usize, var: String },
    #[error("line {line}: unknown neuron `{name}`")]
    UnknownNeuron { line: usize, name: String },
    #[error("line {line}: neuron `{neuron}` has rank {rank} but is addressed with {coords} coordinates")]
    PatternRank {
        line: usize,
        neuron: String,
        rank: usize,
        coords: usize,
    },
    #[error("line {line}: neuron `{neuron}`: {detail}")]
    CoordinateOutOfRange {
        line: usize,
        neuron: String,
        detail: String,
    },
    #[error("line {line}: neuron `{neuron}` has no label `{label}` on axis {axis}")]
    UnknownLabel {
        line: usize,
        neuron: String,
        axis: usize,
        label: String,
    },
    #[error("line {line}: neuron `{neuron}` is produced by `{op}`, not a softmax or sigmoid")]
    NotNormalizedNeuron {
        line: usize,
        neuron: String,
        op: &'static str,
    },
    #[error("line {line}: no data table named `{name}`")]
    UnknownTable { line: usize, name: String },
    #[error("line {line}: {message}")]
    Invalid { line: usize, message: String },
    #[error("line {line}: auxiliary `{name}` is defined twice for the same arguments")]
    AmbiguousAuxiliary { line: usize, name: String },
    #[error("line {line}: auxiliary `{name}` depends on itself")]
    RecursiveAuxiliary { line: usize, name: String },
    #[error("line {line}: {source}")]
    Distance { line: usize, source: DistanceError },
    #[error("node `{node}` has no pre-activation to constrain")]
    NoPreActivation { node: String },
    #[error("no auxiliary layer named `{0}`")]
    UnknownAuxiliary(String),
    #[error(transparent)]
    Normalize(#[from] NormalizeError),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

impl AugmentError {
    /// Source line of the offending statement, when known.
    pub fn line(&self) -> Option<usize> {
        use AugmentError::*;
        match self {
            CyclicRule { line, .. }
            | UnsupportedConsequent { line, .. }
            | UnknownPredicate { line, .. }
            | UnknownIndexSet { line, .. }
            | UnboundVariable { line, .. }
            | OffsetOnUnordered { line, .. }
            | UnknownNeuron { line, .. }
            | PatternRank { line, .. }
            | CoordinateOutOfRange { line, .. }
            | UnknownLabel { line, .. }
            | NotNormalizedNeuron { line, .. }
            | UnknownTable { line, .. }
            | Invalid { line, .. }
            | AmbiguousAuxiliary { line, .. }
            | RecursiveAuxiliary { line, .. }
            | Distance { line, .. } => (*line > 0).then_some(*line),
            _ => None,
        }
    }
}
