//! Grounding: instantiate quantified statements on one example's index sets.

use std::collections::{BTreeMap, HashMap, HashSet};

use super::context::{GroundingContext, IndexElement, IndexSet};
use super::AugmentError;
use crate::graph::{ComputationGraph, Cyclicity, NodeId, Op};
use crate::rules::{
    decompose_consequent, normalize_antecedent, AuxBuiltin, AuxDefinition, Binding, Const, Coord,
    Expr, FlatAntecedent, Literal, NeuronPattern, Quantifier, Rho, RuleProgram, RuleStatement,
    StatementKind, Term,
};
use crate::soft_logic::{compile_distance, DistanceExpr};
use crate::tensor::Tensor;

/// Where one distance input comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum Source {
    /// Element `index` (row-major) of the neuron named `node`; `constrained`
    /// selects the post-augmentation version.
    Neuron {
        node: String,
        constrained: bool,
        index: usize,
    },
    /// A constant truth degree from a data table.
    Data(f64),
    /// Element `index` of an auxiliary layer.
    Aux { name: String, index: usize },
}

/// One rule instance: `s[index] += sign * rho * d(z)` on the pre-activation of `target`.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundedConstraint {
    pub target: String,
    pub index: usize,
    pub distance: DistanceExpr<Source>,
    pub rho: Rho,
    /// `+1` promotes the consequent, `-1` inhibits it (negated consequent).
    pub sign: f64,
    pub detach: bool,
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum AuxBody {
    /// One distance per grounded instance; the layer is a vector over instances.
    Distance(Vec<DistanceExpr<Source>>),
    /// `exists j: !(exists i: a[i][j])` where `rows[j]` lists the `a[·][j]` sources.
    Unaligned(Vec<Vec<Source>>),
}

/// A parameter-free layer `y = d(z)` realizing an auxiliary predicate.
#[derive(Debug, Clone, PartialEq)]
pub struct AuxiliaryLayerSpec {
    pub output_name: String,
    pub body: AuxBody,
    pub detach: bool,
}

impl AuxiliaryLayerSpec {
    pub fn len(&self) -> usize {
        match &self.body {
            AuxBody::Distance(v) => v.len(),
            AuxBody::Unaligned(_) => 1,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// A resolved literal argument.
#[derive(Clone, Copy)]
enum Arg<'c> {
    Elem(&'c IndexElement),
    Int(i64),
    Str(&'c str),
}

/// Variable bindings of one instance: (variable, its set, element index).
type Env<'q, 'c> = Vec<(&'q str, &'c IndexSet, usize)>;

/// Grounds the statements of one program against one example.
pub struct Grounder<'a> {
    program: &'a RuleProgram,
    ctx: &'a GroundingContext,
    graph: &'a ComputationGraph,
    aux: BTreeMap<String, AuxiliaryLayerSpec>,
    aux_keys: HashMap<String, HashMap<Vec<usize>, usize>>,
    aux_pending: HashSet<String>,
    targets: Vec<String>,
    next_local: usize,
}

impl<'a> Grounder<'a> {
    pub fn new(program: &'a RuleProgram, ctx: &'a GroundingContext, graph: &'a ComputationGraph) -> Self {
        Grounder {
            program,
            ctx,
            graph,
            aux: BTreeMap::new(),
            aux_keys: HashMap::new(),
            aux_pending: HashSet::new(),
            targets: Vec::new(),
            next_local: 0,
        }
    }

    /// Neurons targeted by the statements grounded so far, in first-seen order.
    pub fn targets(&self) -> &[String] {
        &self.targets
    }

    pub fn into_aux_specs(self) -> BTreeMap<String, AuxiliaryLayerSpec> {
        self.aux
    }

    /// Ground one source statement. Biconditionals only define auxiliaries
    /// (built when first referenced) and yield no constraints.
    pub fn statement(&mut self, stmt: &RuleStatement) -> Result<Vec<GroundedConstraint>, AugmentError> {
        if stmt.kind == StatementKind::Biconditional {
            return Ok(Vec::new());
        }
        let mut out = Vec::new();
        for part in decompose_consequent(stmt)? {
            if let Cyclicity::Cyclic { consequent, antecedent } =
                statement_cyclicity(self.program, &part, self.graph)?
            {
                return Err(AugmentError::CyclicRule {
                    line: stmt.line,
                    consequent: node_label(self.graph, consequent),
                    antecedent: node_label(self.graph, antecedent),
                });
            }
            out.extend(self.implication(&part)?);
        }
        Ok(out)
    }

    fn implication(&mut self, stmt: &RuleStatement) -> Result<Vec<GroundedConstraint>, AugmentError> {
        let line = stmt.line;
        let consequent = match &stmt.consequent {
            Expr::Lit(l) => l.clone(),
            _ => unreachable!("decompose_consequent yields single literals"),
        };
        let pattern = match self.binding(&consequent.predicate, line)? {
            Binding::Neuron(p) => p.clone(),
            _ => {
                return Err(AugmentError::UnsupportedConsequent {
                    line,
                    predicate: consequent.predicate.clone(),
                })
            }
        };
        if !self.targets.contains(&pattern.base) {
            self.targets.push(pattern.base.clone());
        }
        let norm = normalize_antecedent(stmt);
        let locals = self.define_locals(&norm.aux_definitions, &stmt.quantifiers, stmt.detach, line)?;
        let dist = compile_distance(&norm.top()).map_err(|source| AugmentError::Distance { line, source })?;
        let sign = if consequent.negated { -1.0 } else { 1.0 };
        let mut out = Vec::new();
        for env in self.instances(&stmt.quantifiers, line)? {
            let Some(args) = self.resolve_args(&consequent.args, &env, line)? else { continue };
            let Some(index) = self.neuron_index(&pattern, &args, line)? else { continue };
            let Some(inputs) = self.ground_inputs(&dist, &env, &locals, line)? else { continue };
            out.push(GroundedConstraint {
                target: pattern.base.clone(),
                index,
                distance: DistanceExpr { form: dist.form, inputs },
                rho: stmt.rho,
                sign,
                detach: stmt.detach,
                line,
            });
        }
        Ok(out)
    }

    fn binding(&self, predicate: &str, line: usize) -> Result<&'a Binding, AugmentError> {
        self.program
            .predicate(predicate)
            .map(|p| &p.binding)
            .ok_or_else(|| AugmentError::UnknownPredicate {
                line,
                name: predicate.to_string(),
            })
    }

    fn set(&self, name: &str, line: usize) -> Result<&'a IndexSet, AugmentError> {
        self.ctx
            .index_sets
            .get(name)
            .ok_or_else(|| AugmentError::UnknownIndexSet {
                line,
                name: name.to_string(),
            })
    }

    /// Cartesian product of the quantified sets, last quantifier varying fastest.
    fn instances<'q>(&self, quantifiers: &'q [Quantifier], line: usize) -> Result<Vec<Env<'q, 'a>>, AugmentError> {
        let sets = quantifiers
            .iter()
            .map(|q| self.set(&q.set, line))
            .collect::<Result<Vec<_>, _>>()?;
        let mut out = Vec::new();
        if sets.iter().any(|s| s.is_empty()) {
            return Ok(out);
        }
        let mut counter = vec![0usize; sets.len()];
        loop {
            out.push(
                quantifiers
                    .iter()
                    .zip(&sets)
                    .zip(&counter)
                    .map(|((q, s), &i)| (q.var.as_str(), *s, i))
                    .collect(),
            );
            let mut k = sets.len();
            loop {
                if k == 0 {
                    return Ok(out);
                }
                k -= 1;
                counter[k] += 1;
                if counter[k] < sets[k].len() {
                    break;
                }
                counter[k] = 0;
            }
        }
    }

    fn resolve_args<'e>(
        &self,
        terms: &'e [Term],
        env: &[(&str, &'a IndexSet, usize)],
        line: usize,
    ) -> Result<Option<Vec<Arg<'e>>>, AugmentError>
    where
        'a: 'e,
    {
        let mut out = Vec::with_capacity(terms.len());
        for t in terms {
            let arg = match t {
                Term::Const(Const::Int(n)) => Arg::Int(*n),
                Term::Const(Const::Str(s)) => Arg::Str(s),
                Term::Var(v) | Term::Offset(v, _) => {
                    let (_, set, i) = env
                        .iter()
                        .find(|(name, _, _)| name == v)
                        .ok_or_else(|| AugmentError::UnboundVariable { line, var: v.clone() })?;
                    let shift = match t {
                        Term::Offset(_, k) => {
                            if !set.ordered {
                                return Err(AugmentError::OffsetOnUnordered { line, var: v.clone() });
                            }
                            *k
                        }
                        _ => 0,
                    };
                    let j = *i as i64 + shift;
                    if j < 0 || j >= set.len() as i64 {
                        return Ok(None);
                    }
                    Arg::Elem(&set.elements[j as usize])
                }
            };
            out.push(arg);
        }
        Ok(Some(out))
    }

    fn neuron_node(&self, name: &str, line: usize) -> Result<NodeId, AugmentError> {
        self.graph.lookup(name).map_err(|_| AugmentError::UnknownNeuron {
            line,
            name: name.to_string(),
        })
    }

    /// Row-major element addressed by `pattern` with the given arguments.
    fn neuron_index(&self, pattern: &NeuronPattern, args: &[Arg<'_>], line: usize) -> Result<Option<usize>, AugmentError> {
        let node = self.neuron_node(&pattern.base, line)?;
        let rec = self.graph.node(node)?;
        if pattern.coords.len() != rec.shape.len() {
            return Err(AugmentError::PatternRank {
                line,
                neuron: pattern.base.clone(),
                rank: rec.shape.len(),
                coords: pattern.coords.len(),
            });
        }
        let mut index = Vec::with_capacity(pattern.coords.len());
        for (axis, c) in pattern.coords.iter().enumerate() {
            let v = match c {
                Coord::Fixed(p) => *p,
                Coord::Arg(k) => match args.get(*k) {
                    Some(Arg::Elem(e)) => e.pos,
                    Some(Arg::Int(n)) if *n >= 0 => *n as usize,
                    Some(Arg::Int(n)) => {
                        return Err(AugmentError::CoordinateOutOfRange {
                            line,
                            neuron: pattern.base.clone(),
                            detail: format!("negative coordinate {n}"),
                        })
                    }
                    Some(Arg::Str(label)) => rec
                        .axis_labels
                        .get(axis)
                        .and_then(|l| l.as_ref())
                        .and_then(|l| l.iter().position(|x| x == label))
                        .ok_or_else(|| AugmentError::UnknownLabel {
                            line,
                            neuron: pattern.base.clone(),
                            axis,
                            label: label.to_string(),
                        })?,
                    None => {
                        return Err(AugmentError::PatternRank {
                            line,
                            neuron: pattern.base.clone(),
                            rank: rec.shape.len(),
                            coords: args.len(),
                        })
                    }
                },
            };
            index.push(v);
        }
        match Tensor::offset(&rec.shape, &index) {
            Some(o) => Ok(Some(o)),
            None => Err(AugmentError::CoordinateOutOfRange {
                line,
                neuron: pattern.base.clone(),
                detail: format!("{index:?} outside shape {:?}", rec.shape),
            }),
        }
    }

    fn ground_inputs(
        &mut self,
        dist: &DistanceExpr<Literal>,
        env: &[(&str, &'a IndexSet, usize)],
        locals: &HashMap<String, String>,
        line: usize,
    ) -> Result<Option<Vec<(Source, bool)>>, AugmentError> {
        let mut inputs = Vec::with_capacity(dist.arity());
        for (lit, neg) in &dist.inputs {
            let Some(args) = self.resolve_args(&lit.args, env, line)? else { return Ok(None) };
            let Some(src) = self.ground_atom(&lit.predicate, &args, locals, line)? else { return Ok(None) };
            inputs.push((src, *neg));
        }
        Ok(Some(inputs))
    }

    fn ground_atom(
        &mut self,
        predicate: &str,
        args: &[Arg<'_>],
        locals: &HashMap<String, String>,
        line: usize,
    ) -> Result<Option<Source>, AugmentError> {
        if let Some(global) = locals.get(predicate) {
            return Ok(self.aux_instance(global, args, line)?);
        }
        match self.binding(predicate, line)? {
            Binding::Neuron(pattern) => {
                let node = self.neuron_node(&pattern.base, line)?;
                let op = &self.graph.node(node)?.op;
                if !matches!(op, Op::Softmax | Op::Sigmoid) {
                    return Err(AugmentError::NotNormalizedNeuron {
                        line,
                        neuron: pattern.base.clone(),
                        op: op.kind(),
                    });
                }
                Ok(self.neuron_index(pattern, args, line)?.map(|index| Source::Neuron {
                    node: pattern.base.clone(),
                    constrained: pattern.constrained,
                    index,
                }))
            }
            Binding::Data(table) => {
                let t = self.ctx.tables.get(table).ok_or_else(|| AugmentError::UnknownTable {
                    line,
                    name: table.clone(),
                })?;
                let keys: Vec<String> = args
                    .iter()
                    .map(|a| match a {
                        Arg::Elem(e) => e.key.clone(),
                        Arg::Int(n) => n.to_string(),
                        Arg::Str(s) => s.to_string(),
                    })
                    .collect();
                Ok(Some(Source::Data(t.degree(&keys))))
            }
            Binding::Auxiliary(None) => {
                self.ensure_user_aux(predicate, line)?;
                self.aux_instance(predicate, args, line)
            }
            Binding::Auxiliary(Some(AuxBuiltin::Unaligned { predicate: p, inner, outer })) => {
                self.ensure_unaligned(predicate, p, inner, outer, line)?;
                Ok(Some(Source::Aux {
                    name: predicate.to_string(),
                    index: 0,
                }))
            }
        }
    }

    fn aux_instance(&self, name: &str, args: &[Arg<'_>], line: usize) -> Result<Option<Source>, AugmentError> {
        let key = args
            .iter()
            .map(|a| match a {
                Arg::Elem(e) => Ok(e.pos),
                Arg::Int(n) if *n >= 0 => Ok(*n as usize),
                _ => Err(AugmentError::Invalid {
                    line,
                    message: format!("auxiliary `{name}` takes position arguments"),
                }),
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(self.aux_keys[name].get(&key).map(|&index| Source::Aux {
            name: name.to_string(),
            index,
        }))
    }

    /// Build the auxiliaries introduced by normalizing one statement, returning
    /// the map from their local names to unique layer names.
    fn define_locals(
        &mut self,
        defs: &[AuxDefinition],
        quantifiers: &[Quantifier],
        detach: bool,
        line: usize,
    ) -> Result<HashMap<String, String>, AugmentError> {
        let mut locals = HashMap::new();
        if defs.is_empty() {
            return Ok(locals);
        }
        self.next_local += 1;
        for def in defs {
            let global = format!("{}@{}", def.predicate.name, self.next_local);
            let vars: Vec<&str> = def.literal.args.iter().filter_map(Term::var).collect();
            let qs: Vec<Quantifier> = quantifiers
                .iter()
                .filter(|q| vars.contains(&q.var.as_str()))
                .cloned()
                .collect();
            self.define(&global, &qs, &vars, &def.body, &locals, detach, line)?;
            locals.insert(def.predicate.name.clone(), global);
        }
        Ok(locals)
    }

    #[allow(clippy::too_many_arguments)]
    fn define(
        &mut self,
        name: &str,
        quantifiers: &[Quantifier],
        arg_vars: &[&str],
        body: &FlatAntecedent,
        locals: &HashMap<String, String>,
        detach: bool,
        line: usize,
    ) -> Result<(), AugmentError> {
        let dist = compile_distance(body).map_err(|source| AugmentError::Distance { line, source })?;
        let mut keys = HashMap::new();
        let mut instances = Vec::new();
        for env in self.instances(quantifiers, line)? {
            let key: Vec<usize> = arg_vars
                .iter()
                .map(|v| {
                    let (_, set, i) = env.iter().find(|(n, _, _)| n == v).expect("argument is quantified");
                    set.elements[*i].pos
                })
                .collect();
            let Some(inputs) = self.ground_inputs(&dist, &env, locals, line)? else { continue };
            if keys.insert(key, instances.len()).is_some() {
                return Err(AugmentError::AmbiguousAuxiliary {
                    line,
                    name: name.to_string(),
                });
            }
            instances.push(DistanceExpr { form: dist.form, inputs });
        }
        self.aux_keys.insert(name.to_string(), keys);
        self.aux.insert(
            name.to_string(),
            AuxiliaryLayerSpec {
                output_name: name.to_string(),
                body: AuxBody::Distance(instances),
                detach,
            },
        );
        Ok(())
    }

    fn ensure_user_aux(&mut self, name: &str, line: usize) -> Result<(), AugmentError> {
        if self.aux.contains_key(name) {
            return Ok(());
        }
        if !self.aux_pending.insert(name.to_string()) {
            return Err(AugmentError::RecursiveAuxiliary { line, name: name.to_string() });
        }
        let program = self.program;
        let def = program
            .statements
            .iter()
            .find(|s| {
                s.kind == StatementKind::Biconditional
                    && matches!(&s.consequent, Expr::Lit(l) if l.predicate == name)
            })
            .ok_or_else(|| AugmentError::Invalid {
                line,
                message: format!("auxiliary `{name}` has no definition"),
            })?;
        let Expr::Lit(head) = &def.consequent else { unreachable!() };
        let vars: Vec<&str> = head.args.iter().filter_map(Term::var).collect();
        let norm = normalize_antecedent(def);
        let locals = self.define_locals(&norm.aux_definitions, &def.quantifiers, def.detach, def.line)?;
        self.define(name, &def.quantifiers, &vars, &norm.top(), &locals, def.detach, def.line)?;
        self.aux_pending.remove(name);
        Ok(())
    }

    fn ensure_unaligned(
        &mut self,
        name: &str,
        predicate: &str,
        inner: &str,
        outer: &str,
        line: usize,
    ) -> Result<(), AugmentError> {
        if self.aux.contains_key(name) {
            return Ok(());
        }
        let (inner_set, outer_set) = (self.set(inner, line)?, self.set(outer, line)?);
        let none = HashMap::new();
        let mut rows = Vec::with_capacity(outer_set.len());
        for j in &outer_set.elements {
            let mut row = Vec::with_capacity(inner_set.len());
            for i in &inner_set.elements {
                if let Some(s) = self.ground_atom(predicate, &[Arg::Elem(i), Arg::Elem(j)], &none, line)? {
                    row.push(s);
                }
            }
            rows.push(row);
        }
        self.aux_keys
            .insert(name.to_string(), HashMap::from([(Vec::new(), 0)]));
        self.aux.insert(
            name.to_string(),
            AuxiliaryLayerSpec {
                output_name: name.to_string(),
                body: AuxBody::Unaligned(rows),
                detach: false,
            },
        );
        Ok(())
    }
}

fn node_label(g: &ComputationGraph, id: NodeId) -> String {
    g.node(id)
        .ok()
        .and_then(|r| r.name.clone())
        .unwrap_or_else(|| id.to_string())
}

/// Neuron references `(name, constrained)` read by an expression, following
/// auxiliary predicates to their definitions.
fn antecedent_refs(program: &RuleProgram, e: &Expr, seen: &mut HashSet<String>, out: &mut Vec<(String, bool)>) {
    for lit in e.literals() {
        predicate_refs(program, &lit.predicate, seen, out);
    }
}

fn predicate_refs(program: &RuleProgram, name: &str, seen: &mut HashSet<String>, out: &mut Vec<(String, bool)>) {
    if !seen.insert(name.to_string()) {
        return;
    }
    let Some(p) = program.predicate(name) else { return };
    match &p.binding {
        Binding::Neuron(pat) => out.push((pat.base.clone(), pat.constrained)),
        Binding::Data(_) => {}
        Binding::Auxiliary(Some(AuxBuiltin::Unaligned { predicate, .. })) => {
            predicate_refs(program, predicate, seen, out)
        }
        Binding::Auxiliary(None) => {
            for s in &program.statements {
                if s.kind == StatementKind::Biconditional
                    && matches!(&s.consequent, Expr::Lit(l) if l.predicate == name)
                {
                    antecedent_refs(program, &s.antecedent, seen, out);
                }
            }
        }
    }
}

/// Node-level cyclicity of one single-consequent implication against `graph`.
///
/// The consequent node is the neuron being rewritten. An unprimed antecedent
/// reference to that same neuron reads its unconstrained copy and is fine; a
/// primed one would read the value being computed and counts as a self-cycle.
pub fn statement_cyclicity(
    program: &RuleProgram,
    stmt: &RuleStatement,
    graph: &ComputationGraph,
) -> Result<Cyclicity, AugmentError> {
    let line = stmt.line;
    let Expr::Lit(consequent) = &stmt.consequent else {
        return Err(AugmentError::Normalize(crate::rules::NormalizeError::DisjunctiveConsequent(line)));
    };
    let target = match program.predicate(&consequent.predicate).map(|p| &p.binding) {
        Some(Binding::Neuron(p)) => &p.base,
        _ => {
            return Err(AugmentError::UnsupportedConsequent {
                line,
                predicate: consequent.predicate.clone(),
            })
        }
    };
    let lookup = |name: &str| {
        graph.lookup(name).map_err(|_| AugmentError::UnknownNeuron {
            line,
            name: name.to_string(),
        })
    };
    let r = lookup(target)?;
    let mut refs = Vec::new();
    antecedent_refs(program, &stmt.antecedent, &mut HashSet::new(), &mut refs);
    let mut l = Vec::new();
    for (name, constrained) in refs {
        let id = lookup(&name)?;
        if id == r {
            if constrained {
                return Ok(Cyclicity::Cyclic {
                    consequent: r,
                    antecedent: r,
                });
            }
            continue;
        }
        l.push(id);
    }
    Ok(graph.check_cyclicity(&l, &[r])?)
}

/// Ground one statement of `program` (all conjuncts of its consequent).
pub fn ground(
    program: &RuleProgram,
    stmt: &RuleStatement,
    ctx: &GroundingContext,
    graph: &ComputationGraph,
) -> Result<Vec<GroundedConstraint>, AugmentError> {
    Grounder::new(program, ctx, graph).statement(stmt)
}
