//! Oracles and generators shared by the integration suites.
#![allow(dead_code)]

use logaug::augment::{augment_pipeline, GroundingContext, IndexSet};
use logaug::graph::{ComputationGraph, NodeId, NodeRecord, Op};
use logaug::rules::{parse_rules, RuleProgram};
use logaug::runtime::{backward, forward, Feed, ParamStore};
use logaug::tensor::Tensor;
use rand::seq::IndexedRandom;
use rand::Rng;

// ---------------------------------------------------------------------------
// Reachability oracle

/// Transitive closure by repeated squaring of the boolean adjacency matrix:
/// `R ← R ∨ R·R` until it stops changing. `reach[a][b]` means a path of length ≥ 1.
pub fn closure_by_squaring(adj: &[Vec<bool>]) -> Vec<Vec<bool>> {
    let n = adj.len();
    let mut r = adj.to_vec();
    loop {
        let mut next = r.clone();
        for i in 0..n {
            for k in 0..n {
                if r[i][k] {
                    for j in 0..n {
                        if r[k][j] {
                            next[i][j] = true;
                        }
                    }
                }
            }
        }
        if next == r {
            return r;
        }
        r = next;
    }
}

/// A random DAG of scalar nodes: each node takes zero, one or two earlier
/// nodes as inputs. Returns the graph and its adjacency matrix.
pub fn random_dag(rng: &mut impl Rng, n: usize) -> (ComputationGraph, Vec<Vec<bool>>) {
    let mut g = ComputationGraph::new();
    let mut adj = vec![vec![false; n]; n];
    for v in 0..n {
        let fan_in = if v == 0 { 0 } else { rng.random_range(0..=2usize.min(v)) };
        let id = match fan_in {
            0 => g.input(&format!("n{v}"), &[1]).unwrap(),
            1 => {
                let u = rng.random_range(0..v);
                adj[u][v] = true;
                let id = g.add(Op::Sigmoid, &[NodeId(u)]).unwrap();
                g.set_name(id, &format!("n{v}")).unwrap();
                id
            }
            _ => {
                let u = rng.random_range(0..v);
                let w = rng.random_range(0..v);
                adj[u][v] = true;
                adj[w][v] = true;
                let id = g.add(Op::Add, &[NodeId(u), NodeId(w)]).unwrap();
                g.set_name(id, &format!("n{v}")).unwrap();
                id
            }
        };
        assert_eq!(id, NodeId(v));
    }
    (g, adj)
}

// ---------------------------------------------------------------------------
// Random augmented graphs

/// Width of every layer of [`layered_net`].
pub const WIDTH: usize = 3;

/// `a = σ(x·Wa)`, `b = softmax(a·Wb + relu(x·Wc))`, `c = σ(b·Wd)`, and a
/// random linear read-out of `b` and `c` as the `loss` output. Everything
/// differentiable is a parameter so finite differences can reach it.
pub fn layered_net(rng: &mut impl Rng) -> ComputationGraph {
    let m = WIDTH;
    let mut g = ComputationGraph::new();
    let x = g.parameter("x", &[1, m]).unwrap();
    let wa = g.parameter("Wa", &[m, m]).unwrap();
    let wb = g.parameter("Wb", &[m, m]).unwrap();
    let wc = g.parameter("Wc", &[m, m]).unwrap();
    let wd = g.parameter("Wd", &[m, m]).unwrap();
    let sa = g.matmul(x, wa);
    let a = g.unary(Op::Sigmoid, sa);
    g.set_name(a, "a").unwrap();
    let ab = g.matmul(a, wb);
    let xc = g.matmul(x, wc);
    let r = g.unary(Op::Relu, xc);
    let sb = g.add2(ab, r);
    let b = g.unary(Op::Softmax, sb);
    g.set_name(b, "b").unwrap();
    let sc = g.matmul(b, wd);
    let c = g.unary(Op::Sigmoid, sc);
    g.set_name(c, "c").unwrap();
    let mut readout = |g: &mut ComputationGraph, node| {
        let w: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..1.0)).collect();
        let w = g.constant(Tensor::matrix(1, m, w));
        let p = g.mul(node, w);
        g.unary(Op::Sum, p)
    };
    let lb = readout(&mut g, b);
    let lc = readout(&mut g, c);
    let loss = g.add2(lb, lc);
    g.set_output("loss", loss).unwrap();
    g
}

pub fn layered_context() -> GroundingContext {
    GroundingContext::new().with_set("I", IndexSet::range(WIDTH))
}

const LAYERED_DECLS: &str = "\
pred A(1) neuron \"a[0,{0}]\"
pred Ap(1) neuron \"a'[0,{0}]\"
pred B(1) neuron \"b[0,{0}]\"
pred Bp(1) neuron \"b'[0,{0}]\"
pred C(1) neuron \"c[0,{0}]\"
pred Cp(1) neuron \"c'[0,{0}]\"
";

/// What a random program exercises.
#[derive(Debug, Clone, Copy, Default)]
pub struct Coverage {
    pub negated_consequent: bool,
    pub auxiliary: bool,
    pub chained: bool,
}

fn random_atom(rng: &mut impl Rng, pool: &[&str]) -> String {
    let p = pool.choose(rng).unwrap();
    let arg = match rng.random_range(0..4) {
        0 => format!("{}", rng.random_range(0..WIDTH)),
        1 => "i+1".to_string(),
        _ => "i".to_string(),
    };
    let neg = if rng.random_bool(0.35) { "!" } else { "" };
    format!("{neg}{p}({arg})")
}

/// A random antecedent of depth ≤ 2 over `pool`.
fn random_antecedent(rng: &mut impl Rng, pool: &[&str], depth: usize) -> String {
    if depth == 0 || rng.random_bool(0.3) {
        return random_atom(rng, pool);
    }
    let n = rng.random_range(2..=3);
    let op = if rng.random_bool(0.5) { " & " } else { " | " };
    let parts: Vec<String> = (0..n).map(|_| random_antecedent(rng, pool, depth - 1)).collect();
    let body = format!("({})", parts.join(op));
    if rng.random_bool(0.2) {
        format!("!{body}")
    } else {
        body
    }
}

/// A random acyclic program over [`layered_net`]. Each antecedent draws only
/// from neurons that are not downstream of its consequent, so every
/// statement compiles. `detach` marks every statement `@detach`.
pub fn random_layered_rules(rng: &mut impl Rng, detach: bool) -> (String, Coverage) {
    let mut cov = Coverage::default();
    let mut src = String::from(LAYERED_DECLS);
    let uses_aux = rng.random_bool(0.5);
    if uses_aux {
        let body = random_antecedent(rng, &["A", "Ap"], 1);
        src += &format!("pred P(1) aux\nforall i in I: {body} <-> P(i)\n");
    }
    let det = if detach { " @detach" } else { "" };
    for _ in 0..rng.random_range(1..=4) {
        let target = *["a", "b", "b", "c", "c"].choose(rng).unwrap();
        let mut pool: Vec<&str> = match target {
            "a" => vec!["A"],
            "b" => vec!["A", "Ap", "B"],
            _ => vec!["A", "Ap", "B", "Bp", "C"],
        };
        if uses_aux && target != "a" {
            pool.push("P");
        }
        let ante = random_antecedent(rng, &pool, 2);
        cov.auxiliary |= ante.contains("P(");
        let head = |rng: &mut dyn rand::RngCore, pred: &str, cov: &mut Coverage| {
            let neg = rng.random_bool(0.4);
            cov.negated_consequent |= neg;
            let arg = if rng.random_bool(0.2) { "i+1" } else { "i" };
            format!("{}{pred}({arg})", if neg { "!" } else { "" })
        };
        let pred = match target {
            "a" => "Ap",
            "b" => "Bp",
            _ => "Cp",
        };
        let mut cons = head(rng, pred, &mut cov);
        if target == "b" && rng.random_bool(0.25) {
            // Conjunctive consequent: the `b` pool is safe for `c` as well.
            cons = format!("{cons} & {}", head(rng, "Cp", &mut cov));
        }
        let rho = (rng.random_range(0.25..3.0f64) * 100.0).round() / 100.0;
        if ante.contains("Ap") || ante.contains("Bp") {
            cov.chained = true;
        }
        src += &format!("forall i in I: {ante} -> {cons} @rho={rho}{det}\n");
    }
    (src, cov)
}

/// Parse `src` and augment [`layered_net`] with it.
pub fn augment_layered(net: &ComputationGraph, src: &str) -> ComputationGraph {
    let program: RuleProgram = parse_rules(src).unwrap_or_else(|e| panic!("{e}\n{src}"));
    augment_pipeline(&program, net, &layered_context())
        .unwrap_or_else(|e| panic!("{e}\n{src}"))
        .graph
}

/// Glorot-ish random values for every parameter of `g`.
pub fn random_params(rng: &mut impl Rng, g: &ComputationGraph) -> ParamStore {
    let mut p = ParamStore::new();
    for (_, rec) in g.parameters() {
        let n = rec.shape.iter().product();
        let data = (0..n).map(|_| rng.random_range(-1.5..1.5)).collect();
        p.insert(rec.name.clone().unwrap(), Tensor::new(rec.shape.clone(), data));
    }
    p
}

// ---------------------------------------------------------------------------
// Finite differences

/// Smallest distance from any clamp/relu input to its kink.
pub fn kink_margin(g: &ComputationGraph, params: &ParamStore, feed: &Feed) -> f64 {
    let tape = forward(g, params, feed).unwrap();
    let mut margin = f64::INFINITY;
    for rec in g.nodes() {
        let kink = match rec.op {
            Op::MinClamp { hi } => hi,
            Op::MaxClamp { lo } => lo,
            Op::Relu => 0.0,
            _ => continue,
        };
        for &v in tape.value(rec.inputs[0]).data() {
            margin = margin.min((v - kink).abs());
        }
    }
    margin
}

/// Replace every stop-gradient node by a constant holding its current value.
/// Finite differences on the result are the reference for a detached graph.
pub fn freeze_stop_gradients(g: &ComputationGraph, params: &ParamStore, feed: &Feed) -> ComputationGraph {
    let tape = forward(g, params, feed).unwrap();
    let mut out = ComputationGraph::new();
    for (i, rec) in g.nodes().iter().enumerate() {
        let rec = if rec.op == Op::StopGradient {
            NodeRecord {
                op: Op::Constant {
                    value: tape.value(NodeId(i)).clone(),
                },
                inputs: Vec::new(),
                ..rec.clone()
            }
        } else {
            rec.clone()
        };
        out.push_record(rec).unwrap();
    }
    for (role, &id) in g.outputs() {
        out.set_output(role, id).unwrap();
    }
    out
}

pub const FD_STEP: f64 = 1e-5;
/// Relative tolerance of the gradient suite.
pub const FD_RTOL: f64 = 1e-4;
/// Gradients below this are compared absolutely (both sides are noise there).
pub const FD_ATOL: f64 = 1e-8;

#[derive(Debug)]
pub struct FdMismatch {
    pub param: String,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
}

fn loss_value(g: &ComputationGraph, params: &ParamStore, feed: &Feed) -> f64 {
    let loss = g.output("loss").expect("graph has a loss output");
    forward(g, params, feed).unwrap().value(loss).item()
}

/// Compare backprop through `g` with central differences through `reference`
/// (usually `g` itself) on every parameter element.
pub fn check_gradients(
    g: &ComputationGraph,
    reference: &ComputationGraph,
    params: &ParamStore,
    feed: &Feed,
) -> Result<usize, FdMismatch> {
    let loss = g.output("loss").unwrap();
    let tape = forward(g, params, feed).unwrap();
    let grads = backward(g, &tape, loss).unwrap().parameters(g);
    let mut checked = 0;
    for (name, t) in params.iter() {
        let analytic = &grads[name];
        for i in 0..t.numel() {
            let mut plus = params.clone();
            let mut minus = params.clone();
            plus.iter_mut().find(|(n, _)| *n == name).unwrap().1.data_mut()[i] += FD_STEP;
            minus.iter_mut().find(|(n, _)| *n == name).unwrap().1.data_mut()[i] -= FD_STEP;
            let numeric = (loss_value(reference, &plus, feed) - loss_value(reference, &minus, feed)) / (2.0 * FD_STEP);
            let a = analytic.data()[i];
            let err = (a - numeric).abs();
            if err > FD_ATOL && err > FD_RTOL * a.abs().max(numeric.abs()) {
                return Err(FdMismatch {
                    param: name.clone(),
                    index: i,
                    analytic: a,
                    numeric,
                });
            }
            checked += 1;
        }
    }
    Ok(checked)
}

/// Draw parameters until every kink is at least `margin` away, then check
/// gradients in the mode the graph was built for. `None` if no kink-free
/// point was found.
pub fn fd_check_random_point(
    rng: &mut impl Rng,
    g: &ComputationGraph,
    margin: f64,
) -> Option<Result<usize, FdMismatch>> {
    let feed = Feed::new();
    for _ in 0..50 {
        let params = random_params(rng, g);
        if kink_margin(g, &params, &feed) < margin {
            continue;
        }
        let reference = freeze_stop_gradients(g, &params, &feed);
        return Some(check_gradients(g, &reference, &params, &feed));
    }
    None
}

// ---------------------------------------------------------------------------
// Constrained-layer semantics

/// `b' = σ(s + ρ·d)` on scalar neurons, where `d` is driven by the
/// antecedent neuron `a = σ(x)`. Returns `(b', b)` for input `x` and pre-activation `s`.
pub fn scalar_rule_output(rho: &str, x: f64, s: f64) -> (f64, f64) {
    let mut g = ComputationGraph::new();
    let xi = g.input("x", &[1]).unwrap();
    let a = g.unary(Op::Sigmoid, xi);
    g.set_name(a, "a").unwrap();
    let si = g.input("s", &[1]).unwrap();
    let b = g.unary(Op::Sigmoid, si);
    g.set_name(b, "b").unwrap();
    let src = format!("pred A(0) neuron \"a[0]\"\npred Bp(0) neuron \"b'[0]\"\nA -> Bp @rho={rho}\n");
    let aug = augment_pipeline(&parse_rules(&src).unwrap(), &g, &GroundingContext::new()).unwrap();
    let feed: Feed = [("x".to_string(), Tensor::vector(vec![x])), ("s".to_string(), Tensor::vector(vec![s]))].into();
    let tape = forward(&aug.graph, &ParamStore::new(), &feed).unwrap();
    let constrained = tape.get(&aug.graph, "b'").unwrap().data()[0];
    let plain = forward(&g, &ParamStore::new(), &feed).unwrap().get(&g, "b").unwrap().data()[0];
    (constrained, plain)
}

/// One softmax row of random logits under a HARD rule whose distance is 1 on
/// `target` and 0 elsewhere. Returns `(target, argmax of the constrained row)`.
pub fn hard_dominance_trial(rng: &mut impl Rng) -> (usize, usize) {
    use logaug::augment::ExternalPredicateTable;
    use std::sync::Arc;

    let k = rng.random_range(2..=16);
    let target = rng.random_range(0..k);
    let spread = 10f64.powf(rng.random_range(-2.0..3.0));
    let logits: Vec<f64> = (0..k).map(|_| rng.random_range(-spread..spread)).collect();

    let mut g = ComputationGraph::new();
    let s = g.input("s", &[1, k]).unwrap();
    let y = g.unary(Op::Softmax, s);
    g.set_name(y, "y").unwrap();
    let mut table = ExternalPredicateTable::new("pick", 1);
    table.insert([target.to_string()], 1.0);
    let ctx = GroundingContext::new()
        .with_set("K", IndexSet::range(k))
        .with_table("pick", Arc::new(table));
    let src = "pred D(1) data \"pick\"\npred Yp(1) neuron \"y'[0,{0}]\"\nforall j in K: D(j) -> Yp(j) @rho=hard\n";
    let aug = augment_pipeline(&parse_rules(src).unwrap(), &g, &ctx).unwrap();
    let feed: Feed = [("s".to_string(), Tensor::matrix(1, k, logits))].into();
    let tape = forward(&aug.graph, &ParamStore::new(), &feed).unwrap();
    (target, tape.get(&aug.graph, "y'").unwrap().argmax_rows()[0])
}

/// `(task, rules, parameters before, parameters after)` for every shipped
/// rule file augmenting the first test example of its task's model.
pub fn shipped_parameter_counts() -> Vec<(String, String, usize, usize)> {
    use logaug::tasks::{build_instance, generate, shipped_rules, GenConfig, TrainConfig, SHIPPED_RULES};
    let mut out = Vec::new();
    for (name, task, _) in SHIPPED_RULES {
        let data = generate(*task, &GenConfig::for_task(*task));
        let inst = build_instance(&TrainConfig::for_task(*task).model, &data, &data.test[0]);
        let program = shipped_rules(name).unwrap().1;
        let aug = augment_pipeline(&program, &inst.graph, &inst.ctx).unwrap();
        out.push((
            task.to_string(),
            name.to_string(),
            inst.graph.parameter_count(),
            aug.graph.parameter_count(),
        ));
    }
    out
}
