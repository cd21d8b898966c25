//! Normal forms: flat antecedents with auxiliary predicates, consequent
//! decomposition, and contrapositive rewriting.

use std::fmt;

use thiserror::Error;

use super::ast::*;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NormalizeError {
    #[error("line {0}: expected an implication")]
    NotImplication(usize),
    #[error("line {0}: disjunctive consequents cannot be compiled")]
    DisjunctiveConsequent(usize),
    #[error("line {line}: statement has no compilable contrapositive: {reason}")]
    NotContraposable { line: usize, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlatForm {
    Conjunction,
    Disjunction,
}

/// A flat conjunction or disjunction of possibly negated literals.
#[derive(Debug, Clone, PartialEq)]
pub struct FlatAntecedent {
    pub form: FlatForm,
    pub literals: Vec<Literal>,
}

impl FlatAntecedent {
    pub fn eval(&self, atom: &mut dyn FnMut(&Literal) -> bool) -> bool {
        let mut it = self.literals.iter().map(|l| atom(l) != l.negated);
        match self.form {
            FlatForm::Conjunction => it.all(|b| b),
            FlatForm::Disjunction => it.any(|b| b),
        }
    }
}

impl fmt::Display for FlatAntecedent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sep = match self.form {
            FlatForm::Conjunction => " & ",
            FlatForm::Disjunction => " | ",
        };
        for (i, l) in self.literals.iter().enumerate() {
            if i > 0 {
                f.write_str(sep)?;
            }
            write!(f, "{l}")?;
        }
        Ok(())
    }
}

/// An auxiliary predicate introduced by normalization, `body <-> literal`.
#[derive(Debug, Clone, PartialEq)]
pub struct AuxDefinition {
    pub predicate: Predicate,
    pub literal: Literal,
    pub body: FlatAntecedent,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedAntecedent {
    pub form: FlatForm,
    pub literals: Vec<Literal>,
    /// Topologically ordered: each body only mentions earlier auxiliaries.
    pub aux_definitions: Vec<AuxDefinition>,
}

impl NormalizedAntecedent {
    pub fn top(&self) -> FlatAntecedent {
        FlatAntecedent {
            form: self.form,
            literals: self.literals.clone(),
        }
    }

    /// Evaluate with auxiliaries bound to their definitions.
    pub fn eval(&self, atom: &mut dyn FnMut(&Literal) -> bool) -> bool {
        let mut aux: Vec<(String, bool)> = Vec::new();
        for def in &self.aux_definitions {
            let v = def.body.eval(&mut |l: &Literal| lookup(&aux, l).unwrap_or_else(|| atom(l)));
            aux.push((def.literal.predicate.clone(), v));
        }
        self.top()
            .eval(&mut |l: &Literal| lookup(&aux, l).unwrap_or_else(|| atom(l)))
    }
}

fn lookup(aux: &[(String, bool)], l: &Literal) -> Option<bool> {
    aux.iter().find(|(n, _)| *n == l.predicate).map(|(_, v)| *v)
}

impl fmt::Display for NormalizedAntecedent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.top())?;
        for d in &self.aux_definitions {
            write!(f, "; {} <-> {}", d.body, d.literal)?;
        }
        Ok(())
    }
}

/// Push negations down to literals and flatten nested connectives of the same kind.
pub fn negation_normal_form(e: &Expr) -> Expr {
    flatten(nnf(e, false))
}

fn nnf(e: &Expr, neg: bool) -> Expr {
    match e {
        Expr::Lit(l) => Expr::Lit(if neg { l.negate() } else { l.clone() }),
        Expr::Not(inner) => nnf(inner, !neg),
        Expr::And(es) => {
            let parts = es.iter().map(|x| nnf(x, neg)).collect();
            if neg {
                Expr::Or(parts)
            } else {
                Expr::And(parts)
            }
        }
        Expr::Or(es) => {
            let parts = es.iter().map(|x| nnf(x, neg)).collect();
            if neg {
                Expr::And(parts)
            } else {
                Expr::Or(parts)
            }
        }
    }
}

fn flatten(e: Expr) -> Expr {
    match e {
        Expr::And(es) => {
            let mut out = Vec::new();
            for x in es.into_iter().map(flatten) {
                match x {
                    Expr::And(inner) => out.extend(inner),
                    other => out.push(other),
                }
            }
            if out.len() == 1 {
                out.pop().unwrap()
            } else {
                Expr::And(out)
            }
        }
        Expr::Or(es) => {
            let mut out = Vec::new();
            for x in es.into_iter().map(flatten) {
                match x {
                    Expr::Or(inner) => out.extend(inner),
                    other => out.push(other),
                }
            }
            if out.len() == 1 {
                out.pop().unwrap()
            } else {
                Expr::Or(out)
            }
        }
        other => other,
    }
}

struct AuxBuilder<'a> {
    quantifiers: &'a [Quantifier],
    defs: Vec<AuxDefinition>,
}

impl AuxBuilder<'_> {
    fn flat(&mut self, e: &Expr) -> FlatAntecedent {
        match e {
            Expr::Lit(l) => FlatAntecedent {
                form: FlatForm::Conjunction,
                literals: vec![l.clone()],
            },
            Expr::And(es) | Expr::Or(es) => {
                let form = if matches!(e, Expr::And(_)) {
                    FlatForm::Conjunction
                } else {
                    FlatForm::Disjunction
                };
                let literals = es
                    .iter()
                    .map(|x| match x {
                        Expr::Lit(l) => l.clone(),
                        nested => self.define(nested),
                    })
                    .collect();
                FlatAntecedent { form, literals }
            }
            Expr::Not(_) => unreachable!("input is in negation normal form"),
        }
    }

    fn define(&mut self, e: &Expr) -> Literal {
        let body = self.flat(e);
        let used = e.literals();
        let args: Vec<Term> = self
            .quantifiers
            .iter()
            .filter(|q| used.iter().any(|l| l.args.iter().any(|t| t.var() == Some(&q.var))))
            .map(|q| Term::Var(q.var.clone()))
            .collect();
        let name = format!("P#{}", self.defs.len() + 1);
        let literal = Literal::new(name.clone(), args.clone());
        self.defs.push(AuxDefinition {
            predicate: Predicate {
                name,
                arity: args.len(),
                binding: Binding::Auxiliary(None),
                line: 0,
            },
            literal: literal.clone(),
            body,
        });
        literal
    }
}

/// Bring a statement's antecedent into a flat conjunction or disjunction,
/// introducing auxiliary predicates for nested sub-expressions.
pub fn normalize_antecedent(stmt: &RuleStatement) -> NormalizedAntecedent {
    let e = negation_normal_form(&stmt.antecedent);
    let mut builder = AuxBuilder {
        quantifiers: &stmt.quantifiers,
        defs: Vec::new(),
    };
    let top = builder.flat(&e);
    NormalizedAntecedent {
        form: top.form,
        literals: top.literals,
        aux_definitions: builder.defs,
    }
}

/// Split a conjunctive consequent into one implication per conjunct.
pub fn decompose_consequent(stmt: &RuleStatement) -> Result<Vec<RuleStatement>, NormalizeError> {
    if stmt.kind != StatementKind::Implication {
        return Err(NormalizeError::NotImplication(stmt.line));
    }
    let conjuncts = match negation_normal_form(&stmt.consequent) {
        Expr::Lit(l) => vec![l],
        Expr::And(parts) => parts
            .into_iter()
            .map(|p| match p {
                Expr::Lit(l) => Ok(l),
                _ => Err(NormalizeError::DisjunctiveConsequent(stmt.line)),
            })
            .collect::<Result<_, _>>()?,
        _ => return Err(NormalizeError::DisjunctiveConsequent(stmt.line)),
    };
    Ok(conjuncts
        .into_iter()
        .map(|l| RuleStatement {
            consequent: Expr::Lit(l),
            ..stmt.clone()
        })
        .collect())
}

/// Rewrite `L -> R` as `!R -> !L` with negations pushed to the literals.
pub fn contrapositive(stmt: &RuleStatement) -> Result<RuleStatement, NormalizeError> {
    if stmt.kind != StatementKind::Implication {
        return Err(NormalizeError::NotImplication(stmt.line));
    }
    let fail = |reason: &str| NormalizeError::NotContraposable {
        line: stmt.line,
        reason: reason.to_string(),
    };
    let consequent = match negation_normal_form(&stmt.consequent) {
        Expr::Lit(l) => l,
        _ => return Err(fail("the consequent is not a single literal")),
    };
    let new_consequent = match negation_normal_form(&stmt.antecedent) {
        Expr::Lit(l) => Expr::Lit(l.negate()),
        // !(A | B) = !A & !B stays a decomposable conjunction.
        Expr::Or(parts) if parts.iter().all(|p| matches!(p, Expr::Lit(_))) => Expr::And(
            parts
                .into_iter()
                .map(|p| match p {
                    Expr::Lit(l) => Expr::Lit(l.negate()),
                    _ => unreachable!(),
                })
                .collect(),
        ),
        Expr::And(_) => {
            return Err(fail(
                "negating a conjunctive antecedent yields a disjunctive consequent",
            ))
        }
        _ => return Err(fail("the antecedent is not flat")),
    };
    Ok(RuleStatement {
        antecedent: Expr::Lit(consequent.negate()),
        consequent: new_consequent,
        ..stmt.clone()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rules::parse_rules;

    fn atoms(names: &[&str]) -> String {
        names
            .iter()
            .map(|n| format!("pred {n}(0) neuron \"{}'\"\n", n.to_lowercase()))
            .collect()
    }

    fn stmt(src: &str) -> RuleStatement {
        let p = parse_rules(&format!("{}{src}\n", atoms(&["A", "B", "C", "D", "E"]))).unwrap();
        p.statements[0].clone()
    }

    fn names(lits: &[Literal]) -> Vec<String> {
        lits.iter().map(|l| l.to_string()).collect()
    }

    #[test]
    fn nested_antecedent_gets_auxiliaries() {
        let n = normalize_antecedent(&stmt("(!A | B) & (C | D) -> E"));
        assert_eq!(n.form, FlatForm::Conjunction);
        assert_eq!(names(&n.literals), ["P#1", "P#2"]);
        assert_eq!(n.aux_definitions.len(), 2);
        assert_eq!(n.aux_definitions[0].body.form, FlatForm::Disjunction);
        assert_eq!(names(&n.aux_definitions[0].body.literals), ["!A", "B"]);
        assert_eq!(names(&n.aux_definitions[1].body.literals), ["C", "D"]);
    }

    #[test]
    fn flat_antecedent_is_identity() {
        let n = normalize_antecedent(&stmt("A & B -> E"));
        assert_eq!(n.form, FlatForm::Conjunction);
        assert_eq!(names(&n.literals), ["A", "B"]);
        assert!(n.aux_definitions.is_empty());
    }

    #[test]
    fn de_morgan_push_down() {
        let s = stmt("!(A & B) -> E");
        let n = normalize_antecedent(&s);
        assert_eq!(n.form, FlatForm::Disjunction);
        assert_eq!(names(&n.literals), ["!A", "!B"]);
        assert!(n.aux_definitions.is_empty());
        for bits in 0..4u32 {
            let mut v = |l: &Literal| match l.predicate.as_str() {
                "A" => bits & 1 == 1,
                _ => bits & 2 == 2,
            };
            assert_eq!(s.antecedent.eval(&mut v), n.eval(&mut v));
        }
    }

    #[test]
    fn decompose_splits_conjunctions() {
        let parts = decompose_consequent(&stmt("A -> !B & !C & !D & !E")).unwrap();
        assert_eq!(parts.len(), 4);
        assert!(parts
            .iter()
            .all(|p| matches!(&p.consequent, Expr::Lit(l) if l.negated)));
        assert_eq!(decompose_consequent(&stmt("A -> B")).unwrap().len(), 1);
        assert_eq!(
            decompose_consequent(&stmt("A -> B | C")).unwrap_err(),
            NormalizeError::DisjunctiveConsequent(6)
        );
    }

    #[test]
    fn contrapositive_cases() {
        let c = contrapositive(&stmt("B -> A")).unwrap();
        assert_eq!(c.antecedent.to_string(), "!A");
        assert_eq!(c.consequent.to_string(), "!B");
        let c = contrapositive(&stmt("!A -> B")).unwrap();
        assert_eq!(c.antecedent.to_string(), "!B");
        assert_eq!(c.consequent.to_string(), "A");
        assert!(matches!(
            contrapositive(&stmt("A & B -> C")),
            Err(NormalizeError::NotContraposable { .. })
        ));
        let c = contrapositive(&stmt("A | B -> C")).unwrap();
        assert_eq!(decompose_consequent(&c).unwrap().len(), 2);
    }
}
