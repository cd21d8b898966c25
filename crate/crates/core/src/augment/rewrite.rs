//! Graph rewriting: constrained layers and auxiliary layers.
//!
//! The rewritten graph keeps every original node unchanged (same ids, same
//! names); these form the *unconstrained* network that unprimed rule
//! references read. Each rule target `y = g(s)` gets a constrained twin
//! `y' = g(s + Σ sign·ρ·d)`, and every node downstream of a target is cloned
//! under a primed name so that the graph outputs see the constrained values.
//! No parameters are duplicated: parameter nodes are never downstream of anything.

use std::collections::{BTreeMap, HashMap, HashSet};

use serde::Serialize;

use super::ground::{statement_cyclicity, AuxBody, AuxiliaryLayerSpec, GroundedConstraint, Grounder, Source};
use super::{AugmentError, GroundingContext};
use crate::graph::{ComputationGraph, NodeId, Op, Scale};
use crate::rules::{decompose_consequent, Binding, Expr, Rho, RuleProgram, RuleStatement, StatementKind};
use crate::soft_logic::{DistanceExpr, DistanceForm};
use crate::tensor::Tensor;

/// Margin added to the score range for `@rho=hard` statements.
pub const HARD_MARGIN: f64 = 10.0;

/// Name of the constrained version of a neuron.
pub fn primed(name: &str) -> String {
    format!("{name}'")
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct StatementReport {
    pub line: usize,
    pub target: String,
    pub grounded: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct AugmentReport {
    pub statements: Vec<StatementReport>,
    pub auxiliaries: Vec<String>,
}

impl AugmentReport {
    pub fn grounded(&self) -> usize {
        self.statements.iter().map(|s| s.grounded).sum()
    }
}

#[derive(Debug, Clone)]
pub struct Augmented {
    pub graph: ComputationGraph,
    pub report: AugmentReport,
}

impl Augmented {
    /// The constrained version of `name` if the rewrite produced one, else `name` itself.
    pub fn constrained(&self, name: &str) -> Result<NodeId, AugmentError> {
        Ok(self
            .graph
            .lookup(&primed(name))
            .or_else(|_| self.graph.lookup(name))?)
    }
}

/// Ground every statement of `program` on one example and rewrite `graph`.
pub fn augment_pipeline(
    program: &RuleProgram,
    graph: &ComputationGraph,
    ctx: &GroundingContext,
) -> Result<Augmented, AugmentError> {
    let mut report = AugmentReport::default();
    if program.is_empty() {
        return Ok(Augmented {
            graph: graph.clone(),
            report,
        });
    }
    let mut grounder = Grounder::new(program, ctx, graph);
    let mut constraints = Vec::new();
    for stmt in &program.statements {
        if stmt.kind != StatementKind::Implication {
            continue;
        }
        let grounded = grounder.statement(stmt)?;
        let target = decompose_consequent(stmt)?
            .iter()
            .filter_map(|part| consequent_neuron(program, part))
            .collect::<Vec<_>>()
            .join(",");
        report.statements.push(StatementReport {
            line: stmt.line,
            target,
            grounded: grounded.len(),
        });
        constraints.extend(grounded);
    }
    let targets = grounder.targets().to_vec();
    let specs = grounder.into_aux_specs();
    report.auxiliaries = specs.keys().cloned().collect();
    let graph = Rewriter::new(graph, &constraints, &targets, &specs)?.run()?;
    Ok(Augmented { graph, report })
}

fn consequent_neuron(program: &RuleProgram, stmt: &RuleStatement) -> Option<String> {
    match &stmt.consequent {
        Expr::Lit(l) => match program.predicate(&l.predicate).map(|p| &p.binding) {
            Some(Binding::Neuron(p)) => Some(p.base.clone()),
            _ => None,
        },
        _ => None,
    }
}

/// Add constrained layers for already-grounded constraints. Constraints may
/// only read neurons, not auxiliary layers.
pub fn apply_constraints(
    graph: &ComputationGraph,
    constraints: &[GroundedConstraint],
) -> Result<ComputationGraph, AugmentError> {
    let mut targets: Vec<String> = Vec::new();
    for c in constraints {
        if !targets.contains(&c.target) {
            targets.push(c.target.clone());
        }
    }
    Rewriter::new(graph, constraints, &targets, &BTreeMap::new())?.run()
}

/// Add one auxiliary layer reading existing nodes. A constrained source reads
/// the primed node when the graph has one.
pub fn apply_auxiliary(
    graph: &ComputationGraph,
    spec: &AuxiliaryLayerSpec,
) -> Result<(ComputationGraph, NodeId), AugmentError> {
    if graph.lookup(&spec.output_name).is_ok() {
        return Err(AugmentError::Graph(crate::graph::GraphError::DuplicateName(
            spec.output_name.clone(),
        )));
    }
    let specs = BTreeMap::from([(spec.output_name.clone(), spec.clone())]);
    let mut rw = Rewriter::new(graph, &[], &[], &specs)?;
    rw.resolve_constrained_by_name = true;
    let id = rw.aux_node(&spec.output_name)?;
    Ok((rw.out, id))
}

/// Key shared by constraints that can be compiled as one vectorized group.
fn same_group(a: &GroundedConstraint, b: &GroundedConstraint) -> bool {
    a.target == b.target
        && a.line == b.line
        && a.distance.form == b.distance.form
        && a.distance.negations() == b.distance.negations()
        && a.rho == b.rho
        && a.sign == b.sign
        && a.detach == b.detach
}

struct Rewriter<'a> {
    base: &'a ComputationGraph,
    out: ComputationGraph,
    groups: HashMap<NodeId, Vec<Vec<&'a GroundedConstraint>>>,
    aux: &'a BTreeMap<String, AuxiliaryLayerSpec>,
    aux_nodes: HashMap<String, NodeId>,
    aux_active: HashSet<String>,
    primed: Vec<Option<NodeId>>,
    active: Vec<bool>,
    affected: Vec<bool>,
    /// For stand-alone auxiliary layers: resolve `x'` by name instead of rewriting.
    resolve_constrained_by_name: bool,
}

impl<'a> Rewriter<'a> {
    fn new(
        base: &'a ComputationGraph,
        constraints: &'a [GroundedConstraint],
        targets: &[String],
        aux: &'a BTreeMap<String, AuxiliaryLayerSpec>,
    ) -> Result<Self, AugmentError> {
        let mut groups: HashMap<NodeId, Vec<Vec<&GroundedConstraint>>> = HashMap::new();
        let mut target_ids = HashSet::new();
        for t in targets {
            let id = base.lookup(t)?;
            target_ids.insert(id);
            groups.entry(id).or_default();
        }
        let mut prev: Option<&GroundedConstraint> = None;
        for c in constraints {
            let id = base.lookup(&c.target)?;
            target_ids.insert(id);
            let list = groups.entry(id).or_default();
            match (prev, list.last_mut()) {
                (Some(p), Some(last)) if same_group(p, c) => last.push(c),
                _ => list.push(vec![c]),
            }
            prev = Some(c);
        }
        // Hard scales are computed from the score range of their input, so they
        // go last: every soft adjustment is already part of that range.
        for list in groups.values_mut() {
            list.sort_by_key(|g| g[0].rho == Rho::Hard);
        }
        let mut affected = vec![false; base.len()];
        for id in base.ids() {
            affected[id.0] =
                target_ids.contains(&id) || base.node(id)?.inputs.iter().any(|i| affected[i.0]);
        }
        Ok(Rewriter {
            base,
            out: base.clone(),
            groups,
            aux,
            aux_nodes: HashMap::new(),
            aux_active: HashSet::new(),
            primed: vec![None; base.len()],
            active: vec![false; base.len()],
            affected,
            resolve_constrained_by_name: false,
        })
    }

    fn run(mut self) -> Result<ComputationGraph, AugmentError> {
        for id in self.base.ids() {
            if self.affected[id.0] {
                self.constrained(id)?;
            }
        }
        for (role, id) in self.base.outputs().clone() {
            let p = self.constrained(id)?;
            self.out.set_output(&role, p)?;
        }
        Ok(self.out)
    }

    fn label(&self, id: NodeId) -> String {
        self.base
            .node(id)
            .ok()
            .and_then(|r| r.name.clone())
            .unwrap_or_else(|| id.to_string())
    }

    /// The node computing the constrained version of base node `x`.
    fn constrained(&mut self, x: NodeId) -> Result<NodeId, AugmentError> {
        if let Some(p) = self.primed[x.0] {
            return Ok(p);
        }
        if !self.affected[x.0] {
            return Ok(x);
        }
        if self.active[x.0] {
            let name = self.label(x);
            return Err(AugmentError::CyclicRule {
                line: 0,
                consequent: name.clone(),
                antecedent: primed(&name),
            });
        }
        self.active[x.0] = true;
        let rec = self.base.node(x)?.clone();
        let result = if let Some(groups) = self.groups.get(&x).cloned() {
            let (mut s, activation) = if rec.op.is_activation() {
                (self.constrained(rec.inputs[0])?, Some(rec.op.clone()))
            } else if rec.inputs.is_empty() {
                return Err(AugmentError::NoPreActivation { node: self.label(x) });
            } else {
                (self.clone_node(x)?, None)
            };
            for group in &groups {
                let exprs: Vec<&DistanceExpr<Source>> = group.iter().map(|c| &c.distance).collect();
                let d = self.distance_vector(&exprs, group[0].detach)?;
                let sign = group[0].sign;
                let scale = match group[0].rho {
                    Rho::Value(v) => Scale::Fixed(sign * v),
                    Rho::Hard => Scale::Hard {
                        sign,
                        margin: HARD_MARGIN,
                    },
                };
                let indices = group.iter().map(|c| c.index).collect();
                s = self.out.add(Op::ScatterAdd { indices, scale }, &[s, d])?;
            }
            match activation {
                Some(op) => self.out.add(op, &[s])?,
                None => s,
            }
        } else {
            self.clone_node(x)?
        };
        for (axis, labels) in rec.axis_labels.iter().enumerate() {
            if let Some(l) = labels {
                self.out.set_axis_labels(result, axis, l.clone())?;
            }
        }
        if let Some(name) = &rec.name {
            self.out.set_name(result, &primed(name))?;
        }
        self.active[x.0] = false;
        self.primed[x.0] = Some(result);
        Ok(result)
    }

    fn clone_node(&mut self, x: NodeId) -> Result<NodeId, AugmentError> {
        let rec = self.base.node(x)?;
        let (op, inputs) = (rec.op.clone(), rec.inputs.clone());
        let mapped = inputs
            .into_iter()
            .map(|i| self.constrained(i))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(self.out.add(op, &mapped)?)
    }

    fn neuron(&mut self, node: &str, constrained: bool) -> Result<NodeId, AugmentError> {
        if !constrained {
            return Ok(self.base.lookup(node)?);
        }
        if self.resolve_constrained_by_name {
            return Ok(self
                .out
                .lookup(&primed(node))
                .or_else(|_| self.out.lookup(node))?);
        }
        let id = self.base.lookup(node)?;
        self.constrained(id)
    }

    /// A vector of the given sources, built from gathers and constants.
    fn gather(&mut self, sources: &[&Source]) -> Result<NodeId, AugmentError> {
        let mut parts = Vec::new();
        let mut k = 0;
        while k < sources.len() {
            let mut end = k + 1;
            let same_run = |a: &Source, b: &Source| match (a, b) {
                (Source::Data(_), Source::Data(_)) => true,
                (
                    Source::Neuron { node: n1, constrained: c1, .. },
                    Source::Neuron { node: n2, constrained: c2, .. },
                ) => n1 == n2 && c1 == c2,
                (Source::Aux { name: a, .. }, Source::Aux { name: b, .. }) => a == b,
                _ => false,
            };
            while end < sources.len() && same_run(sources[k], sources[end]) {
                end += 1;
            }
            let run = &sources[k..end];
            let part = match run[0] {
                Source::Data(_) => {
                    let v = run
                        .iter()
                        .map(|s| match s {
                            Source::Data(v) => *v,
                            _ => unreachable!(),
                        })
                        .collect();
                    self.out.constant(Tensor::vector(v))
                }
                Source::Neuron { node, constrained, .. } => {
                    let from = self.neuron(node, *constrained)?;
                    let indices = run
                        .iter()
                        .map(|s| match s {
                            Source::Neuron { index, .. } => *index,
                            _ => unreachable!(),
                        })
                        .collect();
                    self.out.add(Op::Gather { indices }, &[from])?
                }
                Source::Aux { name, .. } => {
                    let from = self.aux_node(name)?;
                    let indices = run
                        .iter()
                        .map(|s| match s {
                            Source::Aux { index, .. } => *index,
                            _ => unreachable!(),
                        })
                        .collect();
                    self.out.add(Op::Gather { indices }, &[from])?
                }
            };
            parts.push(part);
            k = end;
        }
        match parts.len() {
            0 => Ok(self.out.constant(Tensor::vector(Vec::new()))),
            1 => Ok(parts[0]),
            _ => Ok(self.out.add(Op::Concat { axis: 0 }, &parts)?),
        }
    }

    /// `d` for every expression, as one vector. All expressions share form and negations.
    fn distance_vector(&mut self, exprs: &[&DistanceExpr<Source>], detach: bool) -> Result<NodeId, AugmentError> {
        let first = exprs[0];
        let n = first.arity();
        let mut acc: Option<NodeId> = None;
        for p in 0..n {
            let column: Vec<&Source> = exprs.iter().map(|e| &e.inputs[p].0).collect();
            let mut z = self.gather(&column)?;
            if first.inputs[p].1 {
                z = self.out.add(Op::Affine { scale: -1.0, shift: 1.0 }, &[z])?;
            }
            acc = Some(match acc {
                None => z,
                Some(a) => self.out.add(Op::Add, &[a, z])?,
            });
        }
        let u = acc.expect("distances have at least one input");
        let nf = n as f64;
        let (affine, clamp) = match first.form {
            DistanceForm::Conj => (Some((1.0, 1.0 - nf)), Op::MaxClamp { lo: 0.0 }),
            DistanceForm::Disj => (None, Op::MinClamp { hi: 1.0 }),
            DistanceForm::NegDisj => (Some((-1.0, 1.0)), Op::MaxClamp { lo: 0.0 }),
            DistanceForm::NegConj => (Some((-1.0, nf)), Op::MinClamp { hi: 1.0 }),
        };
        let mut d = u;
        if let Some((scale, shift)) = affine {
            d = self.out.add(Op::Affine { scale, shift }, &[d])?;
        }
        d = self.out.add(clamp, &[d])?;
        if detach {
            d = self.out.add(Op::StopGradient, &[d])?;
        }
        Ok(d)
    }

    fn aux_node(&mut self, name: &str) -> Result<NodeId, AugmentError> {
        if let Some(&id) = self.aux_nodes.get(name) {
            return Ok(id);
        }
        if !self.aux_active.insert(name.to_string()) {
            return Err(AugmentError::RecursiveAuxiliary {
                line: 0,
                name: name.to_string(),
            });
        }
        let spec = self
            .aux
            .get(name)
            .ok_or_else(|| AugmentError::UnknownAuxiliary(name.to_string()))?;
        let mut id = match &spec.body {
            AuxBody::Distance(instances) if instances.is_empty() => self.out.constant(Tensor::vector(Vec::new())),
            AuxBody::Distance(instances) => {
                let exprs: Vec<&DistanceExpr<Source>> = instances.iter().collect();
                self.distance_vector(&exprs, false)?
            }
            AuxBody::Unaligned(rows) => self.unaligned(rows)?,
        };
        if spec.detach {
            id = self.out.add(Op::StopGradient, &[id])?;
        }
        self.out.set_name(id, &spec.output_name)?;
        self.aux_active.remove(name);
        self.aux_nodes.insert(name.to_string(), id);
        Ok(id)
    }

    /// `min(1, Σ_j (1 − min(1, Σ_i a_ij)))` as a parameter-free stack.
    fn unaligned(&mut self, rows: &[Vec<Source>]) -> Result<NodeId, AugmentError> {
        let flat: Vec<&Source> = rows.iter().flatten().collect();
        let total = flat.len();
        let v = self.gather(&flat)?;
        let column = self.out.add(Op::Reshape { shape: vec![total, 1] }, &[v])?;
        // Row-membership matrix: row j selects its own block of the flattened sources.
        let mut member = vec![0.0; rows.len() * total];
        let mut k = 0;
        for (j, row) in rows.iter().enumerate() {
            for _ in row {
                member[j * total + k] = 1.0;
                k += 1;
            }
        }
        let m = self.out.constant(Tensor::matrix(rows.len(), total, member));
        let inner = self.out.add(Op::MatMul, &[m, column])?;
        let inner = self.out.add(Op::MinClamp { hi: 1.0 }, &[inner])?;
        let missing = self.out.add(Op::Affine { scale: -1.0, shift: 1.0 }, &[inner])?;
        let outer = self.out.add(Op::Sum, &[missing])?;
        let outer = self.out.add(Op::MinClamp { hi: 1.0 }, &[outer])?;
        Ok(self.out.add(Op::Reshape { shape: vec![1] }, &[outer])?)
    }
}

/// Cyclicity verdict for every single-consequent implication of `program`.
pub fn program_cyclicity(
    program: &RuleProgram,
    graph: &ComputationGraph,
) -> Result<Vec<(usize, crate::graph::Cyclicity)>, AugmentError> {
    let mut out = Vec::new();
    for stmt in &program.statements {
        if stmt.kind != StatementKind::Implication {
            continue;
        }
        for part in decompose_consequent(stmt)? {
            out.push((stmt.line, statement_cyclicity(program, &part, graph)?));
        }
    }
    Ok(out)
}
