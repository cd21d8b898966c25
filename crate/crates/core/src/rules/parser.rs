//! Line-oriented recursive-descent parser for `.rules` files.
//!
//! ```text
//! # comment
//! pred K(2) data "relate.tsv"
//! pred A(2) neuron "att[{0},{1}]"
//! pred Aq(2) neuron "att'[{0},{1}]"
//! forall i in Cp, j in Cq: K(i,j) & A(i,j) -> Aq(i,j) @rho=2
//! ```
//!
//! Declarations are collected before statements are checked, so a predicate may
//! be used above the line that declares it.

use std::collections::HashMap;

use thiserror::Error;

use super::ast::*;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("{line}:{col}: expected {expected}")]
    Syntax {
        line: usize,
        col: usize,
        expected: String,
    },
    #[error("unknown predicate `{0}`")]
    UnknownPredicate(String),
    #[error("predicate `{name}` expects {expected} argument(s), got {got}")]
    ArityMismatch {
        name: String,
        expected: usize,
        got: usize,
    },
    #[error("variable `{0}` is not bound by a quantifier")]
    UnboundVariable(String),
    #[error("line {line}: predicate `{name}` is declared twice")]
    DuplicatePredicate { name: String, line: usize },
    #[error("line {line}: {message}")]
    Invalid { line: usize, message: String },
}

impl ParseError {
    fn invalid(line: usize, message: impl Into<String>) -> Self {
        ParseError::Invalid {
            line,
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Str(String),
    Int(i64),
    Float(f64),
    LParen,
    RParen,
    Comma,
    Colon,
    Amp,
    Pipe,
    Bang,
    Arrow,
    DArrow,
    Plus,
    Minus,
    At,
    Eq,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Str(s) => format!("string \"{s}\""),
            Tok::Int(i) => format!("integer {i}"),
            Tok::Float(x) => format!("number {x}"),
            other => format!("`{}`", other.symbol()),
        }
    }

    fn symbol(&self) -> &'static str {
        match self {
            Tok::LParen => "(",
            Tok::RParen => ")",
            Tok::Comma => ",",
            Tok::Colon => ":",
            Tok::Amp => "&",
            Tok::Pipe => "|",
            Tok::Bang => "!",
            Tok::Arrow => "->",
            Tok::DArrow => "<->",
            Tok::Plus => "+",
            Tok::Minus => "-",
            Tok::At => "@",
            Tok::Eq => "=",
            _ => "?",
        }
    }
}

fn lex(line_no: usize, text: &str) -> Result<Vec<(Tok, usize)>, ParseError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    let err = |col: usize, expected: &str| ParseError::Syntax {
        line: line_no,
        col,
        expected: expected.to_string(),
    };
    while i < chars.len() {
        let c = chars[i];
        let col = i + 1;
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        if c == '#' {
            break;
        }
        let single = match c {
            '(' => Some(Tok::LParen),
            ')' => Some(Tok::RParen),
            ',' => Some(Tok::Comma),
            ':' => Some(Tok::Colon),
            '&' => Some(Tok::Amp),
            '|' => Some(Tok::Pipe),
            '!' => Some(Tok::Bang),
            '+' => Some(Tok::Plus),
            '@' => Some(Tok::At),
            '=' => Some(Tok::Eq),
            _ => None,
        };
        if let Some(t) = single {
            out.push((t, col));
            i += 1;
            continue;
        }
        if c == '-' {
            if chars.get(i + 1) == Some(&'>') {
                out.push((Tok::Arrow, col));
                i += 2;
            } else {
                out.push((Tok::Minus, col));
                i += 1;
            }
            continue;
        }
        if c == '<' {
            if chars.get(i + 1) == Some(&'-') && chars.get(i + 2) == Some(&'>') {
                out.push((Tok::DArrow, col));
                i += 3;
                continue;
            }
            return Err(err(col, "`<->`"));
        }
        if c == '"' {
            let start = i + 1;
            let mut j = start;
            while j < chars.len() && chars[j] != '"' {
                j += 1;
            }
            if j == chars.len() {
                return Err(err(col, "closing `\"`"));
            }
            out.push((Tok::Str(chars[start..j].iter().collect()), col));
            i = j + 1;
            continue;
        }
        if c.is_ascii_digit() {
            let start = i;
            while i < chars.len() {
                let d = chars[i];
                let exponent_sign =
                    (d == '-' || d == '+') && matches!(chars[i - 1], 'e' | 'E');
                if d.is_ascii_digit() || d == '.' || d == 'e' || d == 'E' || exponent_sign {
                    i += 1;
                } else {
                    break;
                }
            }
            let s: String = chars[start..i].iter().collect();
            if let Ok(v) = s.parse::<i64>() {
                out.push((Tok::Int(v), col));
            } else if let Ok(v) = s.parse::<f64>() {
                out.push((Tok::Float(v), col));
            } else {
                return Err(err(col, "a number"));
            }
            continue;
        }
        if c.is_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_' || chars[i] == '\'')
            {
                i += 1;
            }
            out.push((Tok::Ident(chars[start..i].iter().collect()), col));
            continue;
        }
        return Err(err(col, "a token"));
    }
    Ok(out)
}

struct Cursor<'a> {
    toks: &'a [(Tok, usize)],
    pos: usize,
    line: usize,
    eol_col: usize,
}

impl<'a> Cursor<'a> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(t, _)| t)
    }

    fn peek_at(&self, k: usize) -> Option<&Tok> {
        self.toks.get(self.pos + k).map(|(t, _)| t)
    }

    fn col(&self) -> usize {
        self.toks.get(self.pos).map(|(_, c)| *c).unwrap_or(self.eol_col)
    }

    fn fail<T>(&self, expected: &str) -> Result<T, ParseError> {
        let found = self
            .peek()
            .map(|t| format!(", found {}", t.describe()))
            .unwrap_or_else(|| ", found end of line".to_string());
        Err(ParseError::Syntax {
            line: self.line,
            col: self.col(),
            expected: format!("{expected}{found}"),
        })
    }

    fn bump(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|(t, _)| t.clone());
        self.pos += 1;
        t
    }

    fn eat(&mut self, tok: &Tok) -> bool {
        if self.peek() == Some(tok) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, tok: Tok) -> Result<(), ParseError> {
        if self.eat(&tok) {
            Ok(())
        } else {
            self.fail(&format!("`{}`", tok.symbol()))
        }
    }

    fn ident(&mut self, what: &str) -> Result<String, ParseError> {
        match self.peek() {
            Some(Tok::Ident(s)) => {
                let s = s.clone();
                self.pos += 1;
                Ok(s)
            }
            _ => self.fail(what),
        }
    }

    fn keyword(&mut self, kw: &str) -> Result<(), ParseError> {
        match self.peek() {
            Some(Tok::Ident(s)) if s == kw => {
                self.pos += 1;
                Ok(())
            }
            _ => self.fail(&format!("`{kw}`")),
        }
    }

    fn at_end(&self) -> bool {
        self.pos >= self.toks.len()
    }
}

fn parse_decl(c: &mut Cursor, line: usize) -> Result<Predicate, ParseError> {
    c.keyword("pred")?;
    let name = c.ident("a predicate name")?;
    c.expect(Tok::LParen)?;
    let arity = match c.bump() {
        Some(Tok::Int(n)) if n >= 0 => n as usize,
        _ => {
            c.pos -= 1;
            return c.fail("a non-negative arity");
        }
    };
    c.expect(Tok::RParen)?;
    let kind = c.ident("`neuron`, `data`, `aux` or `unaligned`")?;
    let binding = match kind.as_str() {
        "neuron" => match c.bump() {
            Some(Tok::Str(s)) => {
                let pattern =
                    NeuronPattern::parse(&s).map_err(|m| ParseError::invalid(line, m))?;
                if !pattern.coords.is_empty() {
                    if let Some(k) = pattern.max_slot() {
                        if k >= arity {
                            return Err(ParseError::invalid(
                                line,
                                format!("pattern `{s}` uses slot {{{k}}} but `{name}` has arity {arity}"),
                            ));
                        }
                    }
                }
                Binding::Neuron(pattern)
            }
            _ => {
                c.pos -= 1;
                return c.fail("a quoted neuron pattern");
            }
        },
        "data" => match c.bump() {
            Some(Tok::Str(s)) => Binding::Data(s),
            _ => {
                c.pos -= 1;
                return c.fail("a quoted table name");
            }
        },
        "aux" => Binding::Auxiliary(None),
        "unaligned" => {
            c.expect(Tok::LParen)?;
            let predicate = c.ident("the attention predicate")?;
            c.expect(Tok::Comma)?;
            let inner = c.ident("the inner index set")?;
            c.expect(Tok::Comma)?;
            let outer = c.ident("the outer index set")?;
            c.expect(Tok::RParen)?;
            if arity != 0 {
                return Err(ParseError::invalid(
                    line,
                    format!("built-in `unaligned` predicate `{name}` must have arity 0"),
                ));
            }
            Binding::Auxiliary(Some(AuxBuiltin::Unaligned {
                predicate,
                inner,
                outer,
            }))
        }
        _ => {
            c.pos -= 1;
            return c.fail("`neuron`, `data`, `aux` or `unaligned`");
        }
    };
    if !c.at_end() {
        return c.fail("end of declaration");
    }
    Ok(Predicate {
        name,
        arity,
        binding,
        line,
    })
}

fn parse_term(c: &mut Cursor) -> Result<Term, ParseError> {
    match c.bump() {
        Some(Tok::Str(s)) => Ok(Term::Const(Const::Str(s))),
        Some(Tok::Int(i)) => Ok(Term::Const(Const::Int(i))),
        Some(Tok::Ident(v)) => {
            let sign = match c.peek() {
                Some(Tok::Plus) => 1,
                Some(Tok::Minus) => -1,
                _ => return Ok(Term::Var(v)),
            };
            c.pos += 1;
            match c.bump() {
                Some(Tok::Int(k)) => Ok(Term::Offset(v, sign * k)),
                _ => {
                    c.pos -= 1;
                    c.fail("an integer offset")
                }
            }
        }
        _ => {
            c.pos -= 1;
            c.fail("an index term")
        }
    }
}

fn parse_atom(c: &mut Cursor) -> Result<Expr, ParseError> {
    if c.eat(&Tok::LParen) {
        let e = parse_or(c)?;
        c.expect(Tok::RParen)?;
        return Ok(e);
    }
    let name = c.ident("a literal or `(`")?;
    let mut args = Vec::new();
    if c.eat(&Tok::LParen) {
        if !c.eat(&Tok::RParen) {
            loop {
                args.push(parse_term(c)?);
                if c.eat(&Tok::RParen) {
                    break;
                }
                c.expect(Tok::Comma)?;
            }
        }
    }
    Ok(Expr::Lit(Literal::new(name, args)))
}

fn parse_unary(c: &mut Cursor) -> Result<Expr, ParseError> {
    if c.eat(&Tok::Bang) {
        // `!P(..)` flips the literal's flag; `!(...)` and `!!...` build a Not node.
        if let Some(Tok::Ident(_)) = c.peek() {
            return match parse_atom(c)? {
                Expr::Lit(l) => Ok(Expr::Lit(l.negate())),
                other => Ok(Expr::not(other)),
            };
        }
        return Ok(Expr::not(parse_unary(c)?));
    }
    parse_atom(c)
}

fn parse_and(c: &mut Cursor) -> Result<Expr, ParseError> {
    let mut parts = vec![parse_unary(c)?];
    while c.eat(&Tok::Amp) {
        parts.push(parse_unary(c)?);
    }
    Ok(if parts.len() == 1 {
        parts.pop().unwrap()
    } else {
        Expr::And(parts)
    })
}

fn parse_or(c: &mut Cursor) -> Result<Expr, ParseError> {
    let mut parts = vec![parse_and(c)?];
    while c.eat(&Tok::Pipe) {
        parts.push(parse_and(c)?);
    }
    Ok(if parts.len() == 1 {
        parts.pop().unwrap()
    } else {
        Expr::Or(parts)
    })
}

fn parse_statement(c: &mut Cursor, line: usize) -> Result<RuleStatement, ParseError> {
    let mut quantifiers = Vec::new();
    if matches!(c.peek(), Some(Tok::Ident(s)) if s == "forall") {
        c.pos += 1;
        loop {
            let var = c.ident("a variable")?;
            c.keyword("in")?;
            let set = c.ident("an index set name")?;
            quantifiers.push(Quantifier { var, set });
            if c.eat(&Tok::Colon) {
                break;
            }
            c.expect(Tok::Comma)?;
        }
    }
    let antecedent = parse_or(c)?;
    let kind = if c.eat(&Tok::Arrow) {
        StatementKind::Implication
    } else if c.eat(&Tok::DArrow) {
        StatementKind::Biconditional
    } else {
        return c.fail("`->` or `<->`");
    };
    let consequent = parse_or(c)?;
    let mut stmt = RuleStatement {
        quantifiers,
        antecedent,
        consequent,
        kind,
        rho: Rho::default(),
        rho_explicit: false,
        detach: false,
        line,
    };
    while c.eat(&Tok::At) {
        let key = c.ident("an annotation name")?;
        match key.as_str() {
            "rho" => {
                c.expect(Tok::Eq)?;
                stmt.rho = match c.bump() {
                    Some(Tok::Int(v)) if v >= 0 => Rho::Value(v as f64),
                    Some(Tok::Float(v)) if v >= 0.0 && v.is_finite() => Rho::Value(v),
                    Some(Tok::Ident(h)) if h == "hard" => Rho::Hard,
                    _ => {
                        c.pos -= 1;
                        return c.fail("a non-negative number or `hard`");
                    }
                };
                stmt.rho_explicit = true;
            }
            "detach" => stmt.detach = true,
            _ => {
                c.pos -= 1;
                return c.fail("`rho` or `detach`");
            }
        }
    }
    if !c.at_end() {
        return c.fail("end of statement");
    }
    Ok(stmt)
}

/// Parse a rule program and resolve every predicate usage against its declarations.
pub fn parse_rules(source: &str) -> Result<RuleProgram, ParseError> {
    let mut program = RuleProgram::default();
    let mut pending = Vec::new();
    for (idx, raw) in source.lines().enumerate() {
        let line = idx + 1;
        let toks = lex(line, raw)?;
        if toks.is_empty() {
            continue;
        }
        let mut c = Cursor {
            toks: &toks,
            pos: 0,
            line,
            eol_col: raw.chars().count() + 1,
        };
        if matches!(c.peek(), Some(Tok::Ident(s)) if s == "pred")
            && matches!(c.peek_at(1), Some(Tok::Ident(_)))
            && c.peek_at(2) == Some(&Tok::LParen)
            && matches!(c.peek_at(3), Some(Tok::Int(_)))
        {
            let decl = parse_decl(&mut c, line)?;
            if program.predicate(&decl.name).is_some() {
                return Err(ParseError::DuplicatePredicate {
                    name: decl.name,
                    line,
                });
            }
            program.predicates.push(decl);
        } else {
            pending.push(parse_statement(&mut c, line)?);
        }
    }
    let arities: HashMap<&str, &Predicate> = program
        .predicates
        .iter()
        .map(|p| (p.name.as_str(), p))
        .collect();
    for p in &program.predicates {
        if let Binding::Auxiliary(Some(AuxBuiltin::Unaligned { predicate, .. })) = &p.binding {
            match arities.get(predicate.as_str()) {
                None => return Err(ParseError::UnknownPredicate(predicate.clone())),
                Some(target) if target.arity != 2 => {
                    return Err(ParseError::ArityMismatch {
                        name: predicate.clone(),
                        expected: 2,
                        got: target.arity,
                    })
                }
                Some(_) => {}
            }
        }
    }
    let mut aux_defined: HashMap<String, usize> = HashMap::new();
    for stmt in &pending {
        check_statement(stmt, &arities, &mut aux_defined)?;
    }
    for p in &program.predicates {
        if p.binding == Binding::Auxiliary(None) && !aux_defined.contains_key(&p.name) {
            return Err(ParseError::invalid(
                p.line,
                format!("auxiliary predicate `{}` has no defining biconditional", p.name),
            ));
        }
    }
    program.statements = pending;
    Ok(program)
}

fn check_statement(
    stmt: &RuleStatement,
    preds: &HashMap<&str, &Predicate>,
    aux_defined: &mut HashMap<String, usize>,
) -> Result<(), ParseError> {
    for (i, q) in stmt.quantifiers.iter().enumerate() {
        if stmt.quantifiers[..i].iter().any(|o| o.var == q.var) {
            return Err(ParseError::invalid(
                stmt.line,
                format!("variable `{}` is quantified twice", q.var),
            ));
        }
    }
    for lit in stmt
        .antecedent
        .literals()
        .into_iter()
        .chain(stmt.consequent.literals())
    {
        let decl = preds
            .get(lit.predicate.as_str())
            .ok_or_else(|| ParseError::UnknownPredicate(lit.predicate.clone()))?;
        if decl.arity != lit.args.len() {
            return Err(ParseError::ArityMismatch {
                name: lit.predicate.clone(),
                expected: decl.arity,
                got: lit.args.len(),
            });
        }
        for t in &lit.args {
            if let Some(v) = t.var() {
                if !stmt.is_bound(v) {
                    return Err(ParseError::UnboundVariable(v.to_string()));
                }
            }
        }
    }
    match stmt.kind {
        StatementKind::Biconditional => {
            let lit = match &stmt.consequent {
                Expr::Lit(l) if !l.negated => l,
                _ => {
                    return Err(ParseError::invalid(
                        stmt.line,
                        "a biconditional must have a single positive auxiliary literal on the right",
                    ))
                }
            };
            let decl = preds[lit.predicate.as_str()];
            if decl.binding != Binding::Auxiliary(None) {
                return Err(ParseError::invalid(
                    stmt.line,
                    format!("`{}` is not a declared `aux` predicate", lit.predicate),
                ));
            }
            let mut seen = Vec::new();
            for t in &lit.args {
                match t {
                    Term::Var(v) if !seen.contains(v) => seen.push(v.clone()),
                    _ => {
                        return Err(ParseError::invalid(
                            stmt.line,
                            "auxiliary arguments must be distinct plain variables",
                        ))
                    }
                }
            }
            if let Some(prev) = aux_defined.insert(lit.predicate.clone(), stmt.line) {
                return Err(ParseError::invalid(
                    stmt.line,
                    format!(
                        "auxiliary predicate `{}` is already defined on line {prev}",
                        lit.predicate
                    ),
                ));
            }
        }
        StatementKind::Implication => {
            for lit in stmt.consequent.literals() {
                if !matches!(preds[lit.predicate.as_str()].binding, Binding::Neuron(_)) {
                    return Err(ParseError::invalid(
                        stmt.line,
                        format!(
                            "consequent `{}` must be bound to a neuron",
                            lit.predicate
                        ),
                    ));
                }
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const DECLS: &str = r#"
pred K(2) data "relate.tsv"
pred Aq(2) neuron "att'[{0},{1}]"
pred Y(2) neuron "y[{0},{1}]"
pred Yc(2) neuron "y'[{0},{1}]"
"#;

    #[test]
    fn parses_alignment_rule() {
        let src = format!("{DECLS}forall i in C, j in C: K(i,j) -> Aq(i,j)\n");
        let p = parse_rules(&src).unwrap();
        assert_eq!(p.statements.len(), 1);
        let s = &p.statements[0];
        assert_eq!(s.kind, StatementKind::Implication);
        assert_eq!(
            s.quantifiers,
            vec![
                Quantifier { var: "i".into(), set: "C".into() },
                Quantifier { var: "j".into(), set: "C".into() }
            ]
        );
        let ij = vec![Term::Var("i".into()), Term::Var("j".into())];
        assert_eq!(s.antecedent, Expr::Lit(Literal::new("K", ij.clone())));
        assert_eq!(s.consequent, Expr::Lit(Literal::new("Aq", ij)));
    }

    #[test]
    fn parses_negated_offset_consequent() {
        let src = format!("{DECLS}forall t in T: Y(t,\"B-VP\") -> !Yc(t+1,\"I-NP\")\n");
        let p = parse_rules(&src).unwrap();
        let s = &p.statements[0];
        match &s.consequent {
            Expr::Lit(l) => {
                assert!(l.negated);
                assert_eq!(l.predicate, "Yc");
                assert_eq!(l.args[0], Term::Offset("t".into(), 1));
                assert_eq!(l.args[1], Term::Const(Const::Str("I-NP".into())));
            }
            other => panic!("unexpected consequent {other:?}"),
        }
    }

    #[test]
    fn unknown_predicate_is_an_error() {
        let src = "pred Aq(2) neuron \"att'[{0},{1}]\"\nforall i in C: K(i,i) -> Aq(i,i)\n";
        assert_eq!(
            parse_rules(src).unwrap_err(),
            ParseError::UnknownPredicate("K".into())
        );
    }

    #[test]
    fn arity_and_binding_errors() {
        let src = format!("{DECLS}forall i in C: K(i) -> Aq(i,i)\n");
        assert_eq!(
            parse_rules(&src).unwrap_err(),
            ParseError::ArityMismatch { name: "K".into(), expected: 2, got: 1 }
        );
        let src = format!("{DECLS}forall i in C: K(i,j) -> Aq(i,i)\n");
        assert_eq!(
            parse_rules(&src).unwrap_err(),
            ParseError::UnboundVariable("j".into())
        );
    }

    #[test]
    fn syntax_error_reports_position() {
        let src = "pred A(0) neuron \"a\"\nA -> \n";
        match parse_rules(src).unwrap_err() {
            ParseError::Syntax { line, col, .. } => {
                assert_eq!(line, 2);
                assert_eq!(col, 6);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn annotations_and_comments() {
        let src = format!(
            "{DECLS}# a comment\nforall t in T: Y(t,\"B-VP\") -> !Yc(t+1,\"I-NP\") @rho=hard @detach # trailing\n"
        );
        let p = parse_rules(&src).unwrap();
        assert_eq!(p.statements[0].rho, Rho::Hard);
        assert!(p.statements[0].rho_explicit);
        assert!(p.statements[0].detach);
        let p = p.with_rho(Rho::Value(3.0));
        assert_eq!(p.statements[0].rho, Rho::Hard);
    }

    #[test]
    fn aux_rules_are_checked() {
        let src = "pred A(0) neuron \"a\"\npred B(0) neuron \"b'\"\npred P(0) aux\nA -> B\n";
        assert!(matches!(parse_rules(src), Err(ParseError::Invalid { .. })));
        let src = "pred A(0) neuron \"a\"\npred B(0) neuron \"b'\"\npred P(0) aux\nA | !A <-> P\nP -> B\n";
        assert_eq!(parse_rules(src).unwrap().statements.len(), 2);
        let src = "pred A(0) neuron \"a\"\npred P(0) aux\nA <-> P\nA <-> P\n";
        assert!(matches!(parse_rules(src), Err(ParseError::Invalid { .. })));
    }

    #[test]
    fn unaligned_builtin() {
        let src = "pred Ap(2) neuron \"att'[{0},{1}]\"\npred Z(0) unaligned(Ap, P, H)\npred Ye(1) neuron \"label'[0,{0}]\"\nZ -> !Ye(\"Entail\")\n";
        let p = parse_rules(src).unwrap();
        assert!(matches!(
            p.predicate("Z").unwrap().binding,
            Binding::Auxiliary(Some(AuxBuiltin::Unaligned { .. }))
        ));
    }

    #[test]
    fn round_trip_prints() {
        let src = format!(
            "{DECLS}forall i in C, j in C: !(K(i,j) & !Y(i,j)) | (K(j,i) & Y(i,\"O\")) -> Aq(i,j) & Yc(i,2) @rho=0.5\n"
        );
        let p = parse_rules(&src).unwrap();
        let again = parse_rules(&p.to_string()).unwrap();
        assert_eq!(p.without_lines(), again.without_lines());
        let tiny = parse_rules("pred A(0) neuron \"a\"\npred B(0) neuron \"b'\"\nA -> B @rho=2.5e-3\n").unwrap();
        assert_eq!(tiny.statements[0].rho, Rho::Value(2.5e-3));
    }
}
