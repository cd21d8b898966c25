//! Abstract syntax for rule programs.
//!
//! A program is a set of predicate declarations plus an ordered list of
//! conditional statements. Expressions stay general here (arbitrary nesting of
//! `&`, `|`, `!`); the normal forms the compiler needs are produced by
//! [`super::normalize`].

use std::collections::BTreeSet;
use std::fmt;

/// A constant index argument: a label name such as `"B-VP"` or an integer.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Const {
    Str(String),
    Int(i64),
}

/// An index term inside a literal's argument list.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Term {
    Var(String),
    /// `t+1` / `t-1`: the element `offset` steps away in the variable's ordered index set.
    Offset(String, i64),
    Const(Const),
}

impl Term {
    pub fn var(&self) -> Option<&str> {
        match self {
            Term::Var(v) | Term::Offset(v, _) => Some(v),
            Term::Const(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Literal {
    pub predicate: String,
    pub args: Vec<Term>,
    pub negated: bool,
}

impl Literal {
    pub fn new(predicate: impl Into<String>, args: Vec<Term>) -> Self {
        Literal {
            predicate: predicate.into(),
            args,
            negated: false,
        }
    }

    pub fn negate(&self) -> Self {
        Literal {
            negated: !self.negated,
            ..self.clone()
        }
    }
}

/// Boolean expression tree over literals.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Lit(Literal),
    Not(Box<Expr>),
    And(Vec<Expr>),
    Or(Vec<Expr>),
}

impl Expr {
    pub fn lit(predicate: &str) -> Expr {
        Expr::Lit(Literal::new(predicate, Vec::new()))
    }

    pub fn not(e: Expr) -> Expr {
        Expr::Not(Box::new(e))
    }

    /// Every literal in the tree, left to right.
    pub fn literals(&self) -> Vec<&Literal> {
        let mut out = Vec::new();
        self.collect_literals(&mut out);
        out
    }

    fn collect_literals<'a>(&'a self, out: &mut Vec<&'a Literal>) {
        match self {
            Expr::Lit(l) => out.push(l),
            Expr::Not(e) => e.collect_literals(out),
            Expr::And(es) | Expr::Or(es) => es.iter().for_each(|e| e.collect_literals(out)),
        }
    }

    /// Names of the predicates used, in sorted order.
    pub fn predicates(&self) -> BTreeSet<String> {
        self.literals()
            .into_iter()
            .map(|l| l.predicate.clone())
            .collect()
    }

    /// Evaluate under a Boolean assignment to literal atoms (negation flags are applied).
    pub fn eval(&self, atom: &mut dyn FnMut(&Literal) -> bool) -> bool {
        match self {
            Expr::Lit(l) => atom(l) != l.negated,
            Expr::Not(e) => !e.eval(atom),
            Expr::And(es) => es.iter().all(|e| e.eval(atom)),
            Expr::Or(es) => es.iter().any(|e| e.eval(atom)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StatementKind {
    Implication,
    Biconditional,
}

/// Scaling factor of a statement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Rho {
    Value(f64),
    Hard,
}

impl Default for Rho {
    fn default() -> Self {
        Rho::Value(1.0)
    }
}

impl fmt::Display for Rho {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Rho::Value(v) => write!(f, "{v}"),
            Rho::Hard => f.write_str("hard"),
        }
    }
}

impl std::str::FromStr for Rho {
    type Err = String;

    /// A non-negative finite number or `hard` (any case).
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("hard") {
            return Ok(Rho::Hard);
        }
        match s.parse::<f64>() {
            Ok(v) if v.is_finite() && v >= 0.0 => Ok(Rho::Value(v)),
            _ => Err(format!("invalid rho `{s}` (expected a non-negative number or `hard`)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Quantifier {
    pub var: String,
    pub set: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RuleStatement {
    pub quantifiers: Vec<Quantifier>,
    pub antecedent: Expr,
    pub consequent: Expr,
    pub kind: StatementKind,
    pub rho: Rho,
    /// `@rho=` was written in the source; grid overrides leave such statements alone.
    pub rho_explicit: bool,
    /// Stop gradients from flowing through the distance into antecedent neurons.
    pub detach: bool,
    /// 1-based source line, 0 for statements built in code.
    pub line: usize,
}

impl RuleStatement {
    pub fn implication(quantifiers: Vec<Quantifier>, antecedent: Expr, consequent: Expr) -> Self {
        RuleStatement {
            quantifiers,
            antecedent,
            consequent,
            kind: StatementKind::Implication,
            rho: Rho::default(),
            rho_explicit: false,
            detach: false,
            line: 0,
        }
    }

    pub fn is_bound(&self, var: &str) -> bool {
        self.quantifiers.iter().any(|q| q.var == var)
    }
}

/// One coordinate of a neuron name pattern.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Coord {
    /// `{k}`: the k-th literal argument.
    Arg(usize),
    /// A literal integer position.
    Fixed(usize),
}

/// Element-addressing pattern such as `att'[{0},{1}]` or `label'[0,{0}]`.
///
/// A trailing `'` on the base name selects the constrained version of the
/// neuron; without it the pattern addresses the unconstrained value.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NeuronPattern {
    pub base: String,
    pub constrained: bool,
    pub coords: Vec<Coord>,
}

impl NeuronPattern {
    pub fn parse(src: &str) -> Result<Self, String> {
        let src = src.trim();
        let (head, coords) = match src.find('[') {
            Some(open) => {
                if !src.ends_with(']') {
                    return Err(format!("pattern `{src}` is missing a closing `]`"));
                }
                (&src[..open], Some(&src[open + 1..src.len() - 1]))
            }
            None => (src, None),
        };
        let (base, constrained) = match head.strip_suffix('\'') {
            Some(b) => (b, true),
            None => (head, false),
        };
        if base.is_empty()
            || !base
                .chars()
                .all(|c| c.is_alphanumeric() || c == '_' || c == '.')
        {
            return Err(format!("invalid neuron name `{head}`"));
        }
        let mut parsed = Vec::new();
        if let Some(body) = coords {
            for part in body.split(',') {
                let part = part.trim();
                let coord = if let Some(inner) =
                    part.strip_prefix('{').and_then(|p| p.strip_suffix('}'))
                {
                    Coord::Arg(
                        inner
                            .parse()
                            .map_err(|_| format!("bad argument slot `{part}`"))?,
                    )
                } else {
                    Coord::Fixed(
                        part.parse()
                            .map_err(|_| format!("bad coordinate `{part}`"))?,
                    )
                };
                parsed.push(coord);
            }
        }
        Ok(NeuronPattern {
            base: base.to_string(),
            constrained,
            coords: parsed,
        })
    }

    /// Highest argument slot referenced, if any.
    pub fn max_slot(&self) -> Option<usize> {
        self.coords
            .iter()
            .filter_map(|c| match c {
                Coord::Arg(k) => Some(*k),
                Coord::Fixed(_) => None,
            })
            .max()
    }
}

impl fmt::Display for NeuronPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.base)?;
        if self.constrained {
            f.write_str("'")?;
        }
        if !self.coords.is_empty() {
            f.write_str("[")?;
            for (i, c) in self.coords.iter().enumerate() {
                if i > 0 {
                    f.write_str(",")?;
                }
                match c {
                    Coord::Arg(k) => write!(f, "{{{k}}}")?,
                    Coord::Fixed(p) => write!(f, "{p}")?,
                }
            }
            f.write_str("]")?;
        }
        Ok(())
    }
}

/// Built-in auxiliary definitions that the rule syntax cannot express directly.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AuxBuiltin {
    /// `Z <-> exists j in outer: !(exists i in inner: P(i,j))`, i.e. some
    /// element of `outer` receives no alignment from `inner`.
    Unaligned {
        predicate: String,
        inner: String,
        outer: String,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Binding {
    Neuron(NeuronPattern),
    /// Truth degrees come from an external table with this name.
    Data(String),
    /// Defined by a biconditional statement, or by a built-in construction.
    Auxiliary(Option<AuxBuiltin>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Predicate {
    pub name: String,
    pub arity: usize,
    pub binding: Binding,
    pub line: usize,
}

/// A parsed rule file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RuleProgram {
    pub predicates: Vec<Predicate>,
    pub statements: Vec<RuleStatement>,
}

impl RuleProgram {
    /// Copy with all source positions zeroed, for structural comparison.
    pub fn without_lines(&self) -> Self {
        let mut p = self.clone();
        p.predicates.iter_mut().for_each(|d| d.line = 0);
        p.statements.iter_mut().for_each(|s| s.line = 0);
        p
    }

    pub fn predicate(&self, name: &str) -> Option<&Predicate> {
        self.predicates.iter().find(|p| p.name == name)
    }

    pub fn is_empty(&self) -> bool {
        self.statements.is_empty()
    }

    /// Set `rho` on every statement whose source did not pin it with `@rho=`.
    pub fn with_rho(mut self, rho: Rho) -> Self {
        for s in &mut self.statements {
            if !s.rho_explicit {
                s.rho = rho;
            }
        }
        self
    }

    /// Concatenate two programs. Predicates declared in both must agree.
    pub fn merge(mut self, other: RuleProgram) -> Result<Self, String> {
        for p in other.predicates {
            match self.predicate(&p.name) {
                Some(existing) if existing.arity != p.arity || existing.binding != p.binding => {
                    return Err(format!(
                        "predicate `{}` is declared differently in merged programs",
                        p.name
                    ))
                }
                Some(_) => {}
                None => self.predicates.push(p),
            }
        }
        self.statements.extend(other.statements);
        Ok(self)
    }
}

// ---------------------------------------------------------------------------
// Pretty printing. Output re-parses to a structurally identical AST.

impl fmt::Display for Const {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Const::Str(s) => write!(f, "\"{s}\""),
            Const::Int(i) => write!(f, "{i}"),
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Var(v) => f.write_str(v),
            Term::Offset(v, o) if *o >= 0 => write!(f, "{v}+{o}"),
            Term::Offset(v, o) => write!(f, "{v}-{}", -o),
            Term::Const(c) => write!(f, "{c}"),
        }
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.negated {
            f.write_str("!")?;
        }
        f.write_str(&self.predicate)?;
        if !self.args.is_empty() {
            f.write_str("(")?;
            for (i, a) in self.args.iter().enumerate() {
                if i > 0 {
                    f.write_str(",")?;
                }
                write!(f, "{a}")?;
            }
            f.write_str(")")?;
        }
        Ok(())
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn child(f: &mut fmt::Formatter<'_>, e: &Expr) -> fmt::Result {
            match e {
                Expr::And(_) | Expr::Or(_) => write!(f, "({e})"),
                _ => write!(f, "{e}"),
            }
        }
        match self {
            Expr::Lit(l) => write!(f, "{l}"),
            Expr::Not(inner) => {
                f.write_str("!")?;
                match inner.as_ref() {
                    Expr::Lit(l) if !l.negated => write!(f, "({l})"),
                    Expr::Lit(l) => write!(f, "{l}"),
                    other => child(f, other),
                }
            }
            Expr::And(es) | Expr::Or(es) => {
                let sep = if matches!(self, Expr::And(_)) { " & " } else { " | " };
                for (i, e) in es.iter().enumerate() {
                    if i > 0 {
                        f.write_str(sep)?;
                    }
                    child(f, e)?;
                }
                Ok(())
            }
        }
    }
}

impl fmt::Display for RuleStatement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if !self.quantifiers.is_empty() {
            f.write_str("forall ")?;
            for (i, q) in self.quantifiers.iter().enumerate() {
                if i > 0 {
                    f.write_str(", ")?;
                }
                write!(f, "{} in {}", q.var, q.set)?;
            }
            f.write_str(": ")?;
        }
        let arrow = match self.kind {
            StatementKind::Implication => "->",
            StatementKind::Biconditional => "<->",
        };
        write!(f, "{} {arrow} {}", self.antecedent, self.consequent)?;
        if self.rho_explicit {
            write!(f, " @rho={}", self.rho)?;
        }
        if self.detach {
            f.write_str(" @detach")?;
        }
        Ok(())
    }
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "pred {}({}) ", self.name, self.arity)?;
        match &self.binding {
            Binding::Neuron(p) => write!(f, "neuron \"{p}\""),
            Binding::Data(t) => write!(f, "data \"{t}\""),
            Binding::Auxiliary(None) => f.write_str("aux"),
            Binding::Auxiliary(Some(AuxBuiltin::Unaligned {
                predicate,
                inner,
                outer,
            })) => write!(f, "unaligned({predicate}, {inner}, {outer})"),
        }
    }
}

impl fmt::Display for RuleProgram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for p in &self.predicates {
            writeln!(f, "{p}")?;
        }
        for s in &self.statements {
            writeln!(f, "{s}")?;
        }
        Ok(())
    }
}
