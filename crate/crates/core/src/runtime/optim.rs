use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::params::ParamStore;
use super::RuntimeError;
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Adam with bias correction; one moment pair per named parameter.
#[derive(Debug, Clone)]
pub struct Adam {
    pub config: AdamConfig,
    step: u64,
    first: BTreeMap<String, Tensor>,
    second: BTreeMap<String, Tensor>,
}

impl Adam {
    pub fn new(config: AdamConfig) -> Self {
        Adam {
            config,
            step: 0,
            first: BTreeMap::new(),
            second: BTreeMap::new(),
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// Update every parameter in `params`; parameters without a gradient entry
    /// are treated as having a zero gradient.
    pub fn step(&mut self, params: &mut ParamStore, grads: &BTreeMap<String, Tensor>) -> Result<(), RuntimeError> {
        for (name, g) in grads {
            let p = params
                .get(name)
                .ok_or_else(|| RuntimeError::MissingBinding(name.clone()))?;
            if p.shape() != g.shape() {
                return Err(RuntimeError::ParameterShape {
                    name: name.clone(),
                    expected: p.shape().to_vec(),
                    got: g.shape().to_vec(),
                });
            }
        }
        self.step += 1;
        let AdamConfig { lr, beta1, beta2, eps } = self.config;
        let c1 = 1.0 - beta1.powi(self.step as i32);
        let c2 = 1.0 - beta2.powi(self.step as i32);
        for (name, p) in params.iter_mut() {
            let m = self
                .first
                .entry(name.clone())
                .or_insert_with(|| Tensor::zeros(p.shape()));
            let v = self
                .second
                .entry(name.clone())
                .or_insert_with(|| Tensor::zeros(p.shape()));
            let g = grads.get(name);
            for i in 0..p.numel() {
                let gi = g.map_or(0.0, |g| g.data()[i]);
                let mi = beta1 * m.data()[i] + (1.0 - beta1) * gi;
                let vi = beta2 * v.data()[i] + (1.0 - beta2) * gi * gi;
                m.data_mut()[i] = mi;
                v.data_mut()[i] = vi;
                p.data_mut()[i] -= lr * (mi / c1) / ((vi / c2).sqrt() + eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_parameters() {
        let mut params = ParamStore::new();
        params.insert("w", Tensor::vector(vec![1.0, -2.0]));
        let before = params.clone();
        let mut adam = Adam::new(AdamConfig::default());
        let grads = BTreeMap::from([("w".to_string(), Tensor::vector(vec![0.0, 0.0]))]);
        adam.step(&mut params, &grads).unwrap();
        assert_eq!(params, before);
    }

    #[test]
    fn first_step_matches_scalar_reference() {
        // Written out independently: after one step from zero moments,
        // m̂ = g and v̂ = g², so Δ = -lr · g / (|g| + ε).
        let (lr, g, eps) = (0.01, 0.3, 1e-8);
        let mut params = ParamStore::new();
        params.insert("w", Tensor::scalar(1.0));
        let mut adam = Adam::new(AdamConfig { lr, ..Default::default() });
        let grads = BTreeMap::from([("w".to_string(), Tensor::scalar(g))]);
        adam.step(&mut params, &grads).unwrap();
        let expected = 1.0 - lr * g / (g.abs() + eps);
        assert!((params.get("w").unwrap().item() - expected).abs() < 1e-12);
    }

    #[test]
    fn descends_a_quadratic() {
        let mut params = ParamStore::new();
        params.insert("w", Tensor::scalar(3.0));
        let mut adam = Adam::new(AdamConfig { lr: 0.1, ..Default::default() });
        let f = |w: f64| w * w;
        let start = f(3.0);
        for _ in 0..2 {
            let w = params.get("w").unwrap().item();
            let grads = BTreeMap::from([("w".to_string(), Tensor::scalar(2.0 * w))]);
            adam.step(&mut params, &grads).unwrap();
        }
        assert!(f(params.get("w").unwrap().item()) < start);
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let mut params = ParamStore::new();
        params.insert("w", Tensor::vector(vec![1.0, 2.0]));
        let grads = BTreeMap::from([("w".to_string(), Tensor::scalar(1.0))]);
        assert!(Adam::new(AdamConfig::default()).step(&mut params, &grads).is_err());
    }
}
