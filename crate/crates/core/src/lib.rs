//! Named-neuron rule augmentation for neural computation graphs.

pub mod augment;
pub mod cli;
pub mod graph;
pub mod runtime;
pub mod rules;
pub mod soft_logic;
pub mod tasks;
pub mod tensor;
