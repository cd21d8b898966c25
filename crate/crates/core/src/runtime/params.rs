use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::graph::ComputationGraph;
use crate::tensor::Tensor;

/// Glorot/Xavier uniform bound `sqrt(6 / (fan_in + fan_out))`.
pub fn glorot_bound(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

/// FNV-1a, used to give every parameter its own generator stream so that
/// initial values do not depend on the order parameters are created in.
fn stream_id(name: &str) -> u64 {
    name.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0100_0000_01b3)
    })
}

/// Trainable tensors shared by name across per-example graphs.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ParamStore {
    tensors: BTreeMap<String, Tensor>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, value: Tensor) -> Option<Tensor> {
        self.tensors.insert(name.into(), value)
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.tensors.get(name)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.tensors.contains_key(name)
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Tensor)> {
        self.tensors.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&String, &mut Tensor)> {
        self.tensors.iter_mut()
    }

    /// Total number of scalars.
    pub fn numel(&self) -> usize {
        self.tensors.values().map(Tensor::numel).sum()
    }

    /// Initialize every parameter of `graph` not yet present. Matrices are
    /// Glorot-uniform from a per-name stream of `seed`; vectors (biases) start at zero.
    pub fn init_missing(&mut self, graph: &ComputationGraph, seed: u64) {
        for (_, rec) in graph.parameters() {
            let Some(name) = &rec.name else { continue };
            if self.contains(name) {
                continue;
            }
            self.insert(name.clone(), Self::glorot(name, &rec.shape, seed));
        }
    }

    fn glorot(name: &str, shape: &[usize], seed: u64) -> Tensor {
        if shape.len() < 2 {
            return Tensor::zeros(shape);
        }
        let fan_out = shape[shape.len() - 1];
        let fan_in = shape[..shape.len() - 1].iter().product::<usize>();
        let bound = glorot_bound(fan_in, fan_out);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream_id(name));
        let n = fan_in * fan_out;
        let data = (0..n).map(|_| rng.random_range(-bound..bound)).collect();
        Tensor::new(shape.to_vec(), data)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn init_is_order_independent_and_bounded() {
        let mut g1 = ComputationGraph::new();
        g1.parameter("a", &[4, 3]).unwrap();
        g1.parameter("b", &[3]).unwrap();
        let mut g2 = ComputationGraph::new();
        g2.parameter("b", &[3]).unwrap();
        g2.parameter("a", &[4, 3]).unwrap();
        let (mut p1, mut p2) = (ParamStore::new(), ParamStore::new());
        p1.init_missing(&g1, 7);
        p2.init_missing(&g2, 7);
        assert_eq!(p1, p2);
        let bound = glorot_bound(4, 3);
        assert!(p1.get("a").unwrap().data().iter().all(|x| x.abs() <= bound));
        assert_eq!(p1.get("b").unwrap().data(), &[0.0; 3]);
        let mut p3 = ParamStore::new();
        p3.init_missing(&g1, 8);
        assert_ne!(p1, p3);
    }
}
