//! Rule language: syntax, parsing, and normal forms.

pub mod ast;
pub mod normalize;
pub mod parser;

pub use ast::{
    AuxBuiltin, Binding, Const, Coord, Expr, Literal, NeuronPattern, Predicate, Quantifier, Rho,
    RuleProgram, RuleStatement, StatementKind, Term,
};
pub use normalize::{
    contrapositive, decompose_consequent, negation_normal_form, normalize_antecedent,
    AuxDefinition, FlatAntecedent, FlatForm, NormalizeError, NormalizedAntecedent,
};
pub use parser::{parse_rules, ParseError};
