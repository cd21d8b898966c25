//! Łukasiewicz distance functions for flat antecedents.
//!
//! | antecedent | distance              |
//! |------------|-----------------------|
//! | `⋀ Zᵢ`     | `max(0, Σ zᵢ − n + 1)` |
//! | `⋁ Zᵢ`     | `min(1, Σ zᵢ)`        |
//! | `¬⋁ Zᵢ`    | `max(0, 1 − Σ zᵢ)`    |
//! | `¬⋀ Zᵢ`    | `min(1, n − Σ zᵢ)`    |
//!
//! A negated input contributes `1 − zᵢ` in place of `zᵢ`. The arithmetic below
//! is written in the same order as the graph lowering in `augment`, so the two
//! agree bit for bit.

use thiserror::Error;

use crate::rules::{FlatAntecedent, FlatForm, Literal};

/// Inputs may exceed the unit interval by at most this much.
pub const RANGE_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DistanceError {
    #[error("distance over an empty antecedent")]
    EmptyAntecedent,
    #[error("input {index} = {value} lies outside [0, 1]")]
    OutOfRange { index: usize, value: f64 },
    #[error("expected {expected} inputs, got {got}")]
    Arity { expected: usize, got: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DistanceForm {
    Conj,
    Disj,
    /// Negation of a disjunction.
    NegDisj,
    /// Negation of a conjunction.
    NegConj,
}

/// A compiled distance: a form over inputs, each optionally negated before the form applies.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceExpr<R = Literal> {
    pub form: DistanceForm,
    pub inputs: Vec<(R, bool)>,
}

impl<R> DistanceExpr<R> {
    pub fn new(form: DistanceForm, inputs: Vec<(R, bool)>) -> Result<Self, DistanceError> {
        if inputs.is_empty() {
            return Err(DistanceError::EmptyAntecedent);
        }
        Ok(DistanceExpr { form, inputs })
    }

    pub fn arity(&self) -> usize {
        self.inputs.len()
    }

    pub fn negations(&self) -> Vec<bool> {
        self.inputs.iter().map(|(_, n)| *n).collect()
    }

    pub fn map_refs<S>(self, mut f: impl FnMut(R) -> S) -> DistanceExpr<S> {
        DistanceExpr {
            form: self.form,
            inputs: self.inputs.into_iter().map(|(r, n)| (f(r), n)).collect(),
        }
    }

    fn check(&self, z: &[f64]) -> Result<(), DistanceError> {
        if z.len() != self.arity() {
            return Err(DistanceError::Arity {
                expected: self.arity(),
                got: z.len(),
            });
        }
        for (index, &value) in z.iter().enumerate() {
            if !(value >= -RANGE_TOLERANCE && value <= 1.0 + RANGE_TOLERANCE) {
                return Err(DistanceError::OutOfRange { index, value });
            }
        }
        Ok(())
    }

    /// Clamp argument `u` before the final min/max.
    fn pre_clamp(&self, z: &[f64]) -> f64 {
        let n = self.arity() as f64;
        let mut sum = None;
        for (&v, (_, neg)) in z.iter().zip(&self.inputs) {
            let t = if *neg { 1.0 - v } else { v };
            sum = Some(match sum {
                None => t,
                Some(s) => s + t,
            });
        }
        let u = sum.unwrap_or(0.0);
        match self.form {
            DistanceForm::Conj => u + (1.0 - n),
            DistanceForm::Disj => u,
            DistanceForm::NegDisj => 1.0 - u,
            DistanceForm::NegConj => n - u,
        }
    }

    pub fn eval(&self, z: &[f64]) -> Result<f64, DistanceError> {
        self.check(z)?;
        let u = self.pre_clamp(z);
        Ok(match self.form {
            DistanceForm::Conj | DistanceForm::NegDisj => u.max(0.0),
            DistanceForm::Disj | DistanceForm::NegConj => u.min(1.0),
        })
    }

    /// Subgradient of [`eval`](Self::eval). At a clamp kink the derivative is 0.
    pub fn gradient(&self, z: &[f64]) -> Result<Vec<f64>, DistanceError> {
        self.check(z)?;
        let u = self.pre_clamp(z);
        let active = match self.form {
            DistanceForm::Conj | DistanceForm::NegDisj => u > 0.0,
            DistanceForm::Disj | DistanceForm::NegConj => u < 1.0,
        };
        let outer = match self.form {
            DistanceForm::Conj | DistanceForm::Disj => 1.0,
            DistanceForm::NegDisj | DistanceForm::NegConj => -1.0,
        };
        Ok(self
            .inputs
            .iter()
            .map(|(_, neg)| {
                if !active {
                    0.0
                } else if *neg {
                    -outer
                } else {
                    outer
                }
            })
            .collect())
    }

    /// Boolean semantics of the form on a vertex of the unit cube.
    pub fn indicator(&self, z: &[bool]) -> bool {
        let mut lits = z.iter().zip(&self.inputs).map(|(&v, (_, neg))| v != *neg);
        match self.form {
            DistanceForm::Conj => lits.all(|b| b),
            DistanceForm::Disj => lits.any(|b| b),
            DistanceForm::NegDisj => !lits.any(|b| b),
            DistanceForm::NegConj => !lits.all(|b| b),
        }
    }
}

/// Compile a flat antecedent. When every literal is negated the negation is
/// lifted out and the expression uses the `NegDisj`/`NegConj` rows directly.
pub fn compile_distance(ante: &FlatAntecedent) -> Result<DistanceExpr<Literal>, DistanceError> {
    if ante.literals.is_empty() {
        return Err(DistanceError::EmptyAntecedent);
    }
    let all_negated = ante.literals.len() > 1 && ante.literals.iter().all(|l| l.negated);
    let (form, inputs) = if all_negated {
        let form = match ante.form {
            FlatForm::Conjunction => DistanceForm::NegDisj,
            FlatForm::Disjunction => DistanceForm::NegConj,
        };
        let atoms = ante
            .literals
            .iter()
            .map(|l| (Literal { negated: false, ..l.clone() }, false))
            .collect();
        (form, atoms)
    } else {
        let form = match ante.form {
            FlatForm::Conjunction => DistanceForm::Conj,
            FlatForm::Disjunction => DistanceForm::Disj,
        };
        let lits = ante
            .literals
            .iter()
            .map(|l| (Literal { negated: false, ..l.clone() }, l.negated))
            .collect();
        (form, lits)
    };
    DistanceExpr::new(form, inputs)
}

/// Indicator of the antecedent: 1 when it holds under the atom assignment `z`.
pub fn ideal_distance(ante: &FlatAntecedent, z: &[bool]) -> f64 {
    let mut it = z.iter().zip(&ante.literals).map(|(&v, l)| v != l.negated);
    let holds = match ante.form {
        FlatForm::Conjunction => it.all(|b| b),
        FlatForm::Disjunction => it.any(|b| b),
    };
    if holds {
        1.0
    } else {
        0.0
    }
}
