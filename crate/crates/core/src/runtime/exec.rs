use std::collections::{BTreeMap, HashMap};

use super::loss::{CLIP_PROBABILITY, NORMALIZATION_TOLERANCE};
use super::params::ParamStore;
use super::RuntimeError;
use crate::graph::{ComputationGraph, NodeId, Op, Scale};
use crate::tensor::{numel, Tensor};

/// Values for the graph's `input` nodes, keyed by name.
pub type Feed = HashMap<String, Tensor>;

/// Every node's value from one forward pass, indexed by `NodeId`. Nodes are
/// evaluated in id order, which is a topological order by construction, and
/// backward walks the same list in reverse.
#[derive(Debug, Clone)]
pub struct Tape {
    values: Vec<Tensor>,
    /// Effective coefficient used by each scatter-add node (0 elsewhere); hard
    /// scales are recorded here so backward treats them as constants.
    coefficients: Vec<f64>,
}

impl Tape {
    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.values[id.0]
    }

    pub fn get(&self, graph: &ComputationGraph, name: &str) -> Result<&Tensor, RuntimeError> {
        Ok(self.value(graph.lookup(name)?))
    }

    pub fn coefficient(&self, id: NodeId) -> f64 {
        self.coefficients[id.0]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

fn bound<'a>(
    graph: &ComputationGraph,
    id: NodeId,
    source: Option<&'a Tensor>,
) -> Result<&'a Tensor, RuntimeError> {
    let rec = graph.node(id)?;
    let name = rec.name.clone().unwrap_or_else(|| id.to_string());
    let t = source.ok_or(RuntimeError::MissingBinding(name.clone()))?;
    if t.shape() != rec.shape.as_slice() {
        return Err(RuntimeError::ShapeMismatch {
            node: id,
            detail: format!("`{name}` declared {:?}, bound {:?}", rec.shape, t.shape()),
        });
    }
    Ok(t)
}

/// Split a shape around `axis` into (outer, axis length, inner) extents.
fn around(shape: &[usize], axis: usize) -> (usize, usize, usize) {
    (
        numel(&shape[..axis]),
        shape[axis],
        numel(&shape[axis + 1..]),
    )
}

fn range_of(data: &[f64]) -> f64 {
    if data.is_empty() {
        return 0.0;
    }
    let (lo, hi) = data
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)));
    hi - lo
}

pub fn forward(graph: &ComputationGraph, params: &ParamStore, inputs: &Feed) -> Result<Tape, RuntimeError> {
    let mut values: Vec<Tensor> = Vec::with_capacity(graph.len());
    let mut coefficients = vec![0.0; graph.len()];
    for id in graph.ids() {
        let rec = graph.node(id)?;
        let arg = |k: usize| &values[rec.inputs[k].0];
        let shape = rec.shape.clone();
        let out = match &rec.op {
            Op::Input => bound(graph, id, rec.name.as_ref().and_then(|n| inputs.get(n)))?.clone(),
            Op::Parameter => bound(graph, id, rec.name.as_ref().and_then(|n| params.get(n)))?.clone(),
            Op::Constant { value } => value.clone(),
            Op::MatMul => {
                let (a, b) = (arg(0), arg(1));
                let (m, k, n) = (a.shape()[0], a.shape()[1], b.shape()[1]);
                let mut out = vec![0.0; m * n];
                let (ad, bd) = (a.data(), b.data());
                for i in 0..m {
                    let row = &mut out[i * n..(i + 1) * n];
                    for p in 0..k {
                        let x = ad[i * k + p];
                        if x == 0.0 {
                            continue;
                        }
                        for (o, &w) in row.iter_mut().zip(&bd[p * n..(p + 1) * n]) {
                            *o += x * w;
                        }
                    }
                }
                Tensor::new(shape, out)
            }
            Op::Add => {
                let (a, b) = (arg(0), arg(1));
                let nb = b.numel().max(1);
                let data = a
                    .data()
                    .iter()
                    .enumerate()
                    .map(|(i, &x)| x + b.data()[i % nb])
                    .collect();
                Tensor::new(shape, data)
            }
            Op::Mul => {
                let data = arg(0).data().iter().zip(arg(1).data()).map(|(x, y)| x * y).collect();
                Tensor::new(shape, data)
            }
            Op::Affine { scale, shift } => map(arg(0), |x| scale * x + shift),
            Op::MinClamp { hi } => map(arg(0), |x| x.min(*hi)),
            Op::MaxClamp { lo } => map(arg(0), |x| x.max(*lo)),
            Op::Sum => Tensor::scalar(arg(0).data().iter().sum()),
            Op::Softmax => {
                let x = arg(0);
                let c = x.last_dim();
                let mut data = x.data().to_vec();
                if c > 0 {
                    for row in data.chunks_mut(c) {
                        let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                        let mut z = 0.0;
                        for v in row.iter_mut() {
                            *v = (*v - m).exp();
                            z += *v;
                        }
                        for v in row.iter_mut() {
                            *v /= z;
                        }
                    }
                }
                Tensor::new(shape, data)
            }
            Op::Sigmoid => map(arg(0), sigmoid),
            Op::Tanh => map(arg(0), f64::tanh),
            Op::Relu => map(arg(0), |x| x.max(0.0)),
            Op::Concat { axis } => {
                let (outer, _, inner) = around(&shape, *axis);
                let mut data = Vec::with_capacity(numel(&shape));
                for o in 0..outer {
                    for &i in &rec.inputs {
                        let t = &values[i.0];
                        let chunk = t.shape()[*axis] * inner;
                        data.extend_from_slice(&t.data()[o * chunk..(o + 1) * chunk]);
                    }
                }
                Tensor::new(shape, data)
            }
            Op::Slice { axis, start, len } => {
                let x = arg(0);
                let (outer, full, inner) = around(x.shape(), *axis);
                let mut data = Vec::with_capacity(numel(&shape));
                for o in 0..outer {
                    let base = o * full * inner + start * inner;
                    data.extend_from_slice(&x.data()[base..base + len * inner]);
                }
                Tensor::new(shape, data)
            }
            Op::Transpose => {
                let x = arg(0);
                let (r, c) = (x.shape()[0], x.shape()[1]);
                let mut data = vec![0.0; r * c];
                for i in 0..r {
                    for j in 0..c {
                        data[j * r + i] = x.data()[i * c + j];
                    }
                }
                Tensor::new(shape, data)
            }
            Op::Reshape { .. } | Op::StopGradient => Tensor::new(shape, arg(0).data().to_vec()),
            Op::Gather { indices } => {
                let x = arg(0);
                Tensor::new(shape, indices.iter().map(|&i| x.data()[i]).collect())
            }
            Op::ScatterAdd { indices, scale } => {
                let (base, vals) = (arg(0), arg(1));
                let c = match scale {
                    Scale::Fixed(c) => *c,
                    Scale::Hard { sign, margin } => sign * (range_of(base.data()) + margin),
                };
                coefficients[id.0] = c;
                let mut data = base.data().to_vec();
                for (&i, &v) in indices.iter().zip(vals.data()) {
                    data[i] += c * v;
                }
                Tensor::new(shape, data)
            }
            Op::Nll { targets } => {
                let p = arg(0);
                let c = p.last_dim();
                let mut loss = 0.0;
                for (row, t) in p.data().chunks(c.max(1)).zip(targets) {
                    if let Some(t) = t {
                        let sum: f64 = row.iter().sum();
                        if (sum - 1.0).abs() > NORMALIZATION_TOLERANCE {
                            return Err(RuntimeError::NotNormalized { sum });
                        }
                        loss -= row[*t].max(CLIP_PROBABILITY).ln();
                    }
                }
                Tensor::scalar(loss)
            }
        };
        if !out.is_finite() {
            return Err(RuntimeError::NonFiniteValue {
                node: id,
                name: rec.name.clone(),
            });
        }
        values.push(out);
    }
    Ok(Tape { values, coefficients })
}

fn map(x: &Tensor, f: impl Fn(f64) -> f64) -> Tensor {
    Tensor::new(x.shape().to_vec(), x.data().iter().map(|&v| f(v)).collect())
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Per-node gradients of one scalar with respect to every node that can reach a parameter.
#[derive(Debug, Clone)]
pub struct Gradients {
    nodes: Vec<Option<Tensor>>,
}

impl Gradients {
    pub fn node(&self, id: NodeId) -> Option<&Tensor> {
        self.nodes.get(id.0).and_then(|g| g.as_ref())
    }

    /// Gradient for every parameter of `graph`, zero where the loss does not reach it.
    pub fn parameters(&self, graph: &ComputationGraph) -> BTreeMap<String, Tensor> {
        graph
            .parameters()
            .map(|(id, rec)| {
                let g = self
                    .node(id)
                    .cloned()
                    .unwrap_or_else(|| Tensor::zeros(&rec.shape));
                (rec.name.clone().unwrap_or_else(|| id.to_string()), g)
            })
            .collect()
    }
}

/// Gradient of the scalar `loss` node.
pub fn backward(graph: &ComputationGraph, tape: &Tape, loss: NodeId) -> Result<Gradients, RuntimeError> {
    graph.check(loss)?;
    if tape.value(loss).numel() != 1 {
        return Err(RuntimeError::NonScalarLoss(loss));
    }
    backward_from(graph, tape, loss, Tensor::filled(graph.shape(loss), 1.0))
}

/// Vector-Jacobian product seeded with `seed` at node `from`.
pub fn backward_from(
    graph: &ComputationGraph,
    tape: &Tape,
    from: NodeId,
    seed: Tensor,
) -> Result<Gradients, RuntimeError> {
    graph.check(from)?;
    if seed.shape() != graph.shape(from) {
        return Err(RuntimeError::ShapeMismatch {
            node: from,
            detail: format!("seed {:?} for {:?}", seed.shape(), graph.shape(from)),
        });
    }
    // Only nodes with a parameter upstream (and no stop-gradient in between) need gradients.
    let mut live = vec![false; graph.len()];
    for id in graph.ids() {
        let rec = graph.node(id)?;
        live[id.0] = match rec.op {
            Op::Parameter => true,
            Op::StopGradient | Op::Input | Op::Constant { .. } => false,
            _ => rec.inputs.iter().any(|i| live[i.0]),
        };
    }
    let mut grads: Vec<Option<Tensor>> = vec![None; graph.len()];
    grads[from.0] = Some(seed);

    for idx in (0..=from.0).rev() {
        let id = NodeId(idx);
        if !live[idx] {
            continue;
        }
        let Some(g) = grads[idx].take() else { continue };
        let rec = graph.node(id)?;
        let out = tape.value(id);
        let x = |k: usize| tape.value(rec.inputs[k]);
        let send = |k: usize, delta: Vec<f64>, grads: &mut Vec<Option<Tensor>>| {
            let target = rec.inputs[k];
            if !live[target.0] {
                return;
            }
            match &mut grads[target.0] {
                Some(acc) => {
                    for (a, d) in acc.data_mut().iter_mut().zip(&delta) {
                        *a += d;
                    }
                }
                slot => *slot = Some(Tensor::new(graph.shape(target).to_vec(), delta)),
            }
        };
        let gd = g.data();
        match &rec.op {
            Op::Input | Op::Parameter | Op::Constant { .. } | Op::StopGradient => {}
            Op::MatMul => {
                let (a, b) = (x(0), x(1));
                let (m, k, n) = (a.shape()[0], a.shape()[1], b.shape()[1]);
                let (ad, bd) = (a.data(), b.data());
                if live[rec.inputs[0].0] {
                    let mut da = vec![0.0; m * k];
                    for i in 0..m {
                        let grow = &gd[i * n..(i + 1) * n];
                        for p in 0..k {
                            da[i * k + p] = grow.iter().zip(&bd[p * n..(p + 1) * n]).map(|(x, y)| x * y).sum();
                        }
                    }
                    send(0, da, &mut grads);
                }
                if live[rec.inputs[1].0] {
                    let mut db = vec![0.0; k * n];
                    for i in 0..m {
                        let grow = &gd[i * n..(i + 1) * n];
                        for p in 0..k {
                            let a_ip = ad[i * k + p];
                            if a_ip == 0.0 {
                                continue;
                            }
                            for (o, &gv) in db[p * n..(p + 1) * n].iter_mut().zip(grow) {
                                *o += a_ip * gv;
                            }
                        }
                    }
                    send(1, db, &mut grads);
                }
            }
            Op::Add => {
                send(0, gd.to_vec(), &mut grads);
                let nb = x(1).numel();
                let mut db = vec![0.0; nb];
                if nb > 0 {
                    for (i, &v) in gd.iter().enumerate() {
                        db[i % nb] += v;
                    }
                }
                send(1, db, &mut grads);
            }
            Op::Mul => {
                let (a, b) = (x(0), x(1));
                send(0, gd.iter().zip(b.data()).map(|(g, y)| g * y).collect(), &mut grads);
                send(1, gd.iter().zip(a.data()).map(|(g, y)| g * y).collect(), &mut grads);
            }
            Op::Affine { scale, .. } => send(0, gd.iter().map(|g| g * scale).collect(), &mut grads),
            Op::MinClamp { hi } => send(
                0,
                gd.iter().zip(x(0).data()).map(|(g, v)| if v < hi { *g } else { 0.0 }).collect(),
                &mut grads,
            ),
            Op::MaxClamp { lo } => send(
                0,
                gd.iter().zip(x(0).data()).map(|(g, v)| if v > lo { *g } else { 0.0 }).collect(),
                &mut grads,
            ),
            Op::Relu => send(
                0,
                gd.iter().zip(x(0).data()).map(|(g, v)| if *v > 0.0 { *g } else { 0.0 }).collect(),
                &mut grads,
            ),
            Op::Sum => send(0, vec![gd[0]; x(0).numel()], &mut grads),
            Op::Softmax => {
                let c = out.last_dim();
                let mut dx = vec![0.0; out.numel()];
                if c > 0 {
                    for ((dxr, yr), gr) in dx.chunks_mut(c).zip(out.data().chunks(c)).zip(gd.chunks(c)) {
                        let dot: f64 = yr.iter().zip(gr).map(|(y, g)| y * g).sum();
                        for ((d, y), g) in dxr.iter_mut().zip(yr).zip(gr) {
                            *d = y * (g - dot);
                        }
                    }
                }
                send(0, dx, &mut grads);
            }
            Op::Sigmoid => send(
                0,
                gd.iter().zip(out.data()).map(|(g, y)| g * y * (1.0 - y)).collect(),
                &mut grads,
            ),
            Op::Tanh => send(
                0,
                gd.iter().zip(out.data()).map(|(g, y)| g * (1.0 - y * y)).collect(),
                &mut grads,
            ),
            Op::Concat { axis } => {
                let (outer, _, inner) = around(out.shape(), *axis);
                let mut parts: Vec<Vec<f64>> =
                    rec.inputs.iter().map(|i| Vec::with_capacity(numel(graph.shape(*i)))).collect();
                let mut pos = 0;
                for _ in 0..outer {
                    for (k, &i) in rec.inputs.iter().enumerate() {
                        let chunk = graph.shape(i)[*axis] * inner;
                        parts[k].extend_from_slice(&gd[pos..pos + chunk]);
                        pos += chunk;
                    }
                }
                for (k, p) in parts.into_iter().enumerate() {
                    send(k, p, &mut grads);
                }
            }
            Op::Slice { axis, start, len } => {
                let (outer, full, inner) = around(x(0).shape(), *axis);
                let mut dx = vec![0.0; x(0).numel()];
                for o in 0..outer {
                    let base = o * full * inner + start * inner;
                    let src = &gd[o * len * inner..(o + 1) * len * inner];
                    dx[base..base + len * inner].copy_from_slice(src);
                }
                send(0, dx, &mut grads);
            }
            Op::Transpose => {
                let (r, c) = (x(0).shape()[0], x(0).shape()[1]);
                let mut dx = vec![0.0; r * c];
                for i in 0..r {
                    for j in 0..c {
                        dx[i * c + j] = gd[j * r + i];
                    }
                }
                send(0, dx, &mut grads);
            }
            Op::Reshape { .. } => send(0, gd.to_vec(), &mut grads),
            Op::Gather { indices } => {
                let mut dx = vec![0.0; x(0).numel()];
                for (&i, &v) in indices.iter().zip(gd) {
                    dx[i] += v;
                }
                send(0, dx, &mut grads);
            }
            Op::ScatterAdd { indices, .. } => {
                let c = tape.coefficient(id);
                send(0, gd.to_vec(), &mut grads);
                send(1, indices.iter().map(|&i| c * gd[i]).collect(), &mut grads);
            }
            Op::Nll { targets } => {
                let p = x(0);
                let c = p.last_dim();
                let mut dx = vec![0.0; p.numel()];
                for (r, t) in targets.iter().enumerate() {
                    if let Some(t) = t {
                        let v = p.data()[r * c + t];
                        if v > CLIP_PROBABILITY {
                            dx[r * c + t] = -gd[0] / v;
                        }
                    }
                }
                send(0, dx, &mut grads);
            }
        }
        grads[idx] = Some(g);
    }
    Ok(Gradients { nodes: grads })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn softmax_and_sigmoid_values() {
        let mut g = ComputationGraph::new();
        let x = g.input("x", &[2]).unwrap();
        let s = g.unary(Op::Softmax, x);
        let z = g.input("z", &[1]).unwrap();
        let q = g.unary(Op::Sigmoid, z);
        let feed = Feed::from([
            ("x".to_string(), Tensor::vector(vec![0.0, 0.0])),
            ("z".to_string(), Tensor::vector(vec![2.0])),
        ]);
        let tape = forward(&g, &ParamStore::new(), &feed).unwrap();
        assert_eq!(tape.value(s).data(), &[0.5, 0.5]);
        assert!((tape.value(q).data()[0] - 0.88079708).abs() < 5e-9);
    }

    #[test]
    fn linear_gradient_is_the_input() {
        let mut g = ComputationGraph::new();
        let x = g.input("x", &[1, 3]).unwrap();
        let w = g.parameter("w", &[3, 1]).unwrap();
        let y = g.matmul(x, w);
        let l = g.unary(Op::Sum, y);
        let mut params = ParamStore::new();
        params.insert("w", Tensor::matrix(3, 1, vec![0.1, -0.2, 0.3]));
        let feed = Feed::from([("x".to_string(), Tensor::matrix(1, 3, vec![1.0, 2.0, 3.0]))]);
        let tape = forward(&g, &params, &feed).unwrap();
        let grads = backward(&g, &tape, l).unwrap().parameters(&g);
        assert_eq!(grads["w"].data(), &[1.0, 2.0, 3.0]);
        assert!(matches!(backward(&g, &tape, y), Ok(_)));
        assert!(matches!(backward(&g, &tape, x), Err(RuntimeError::NonScalarLoss(_))));
    }

    #[test]
    fn missing_binding_and_non_finite() {
        let mut g = ComputationGraph::new();
        let x = g.input("x", &[1]).unwrap();
        let _ = g.affine(x, 1e308, 0.0);
        let err = forward(&g, &ParamStore::new(), &Feed::new()).unwrap_err();
        assert!(matches!(err, RuntimeError::MissingBinding(ref n) if n == "x"));
        let feed = Feed::from([("x".to_string(), Tensor::vector(vec![10.0]))]);
        let err = forward(&g, &ParamStore::new(), &feed).unwrap_err();
        assert!(matches!(err, RuntimeError::NonFiniteValue { .. }));
    }

    #[test]
    fn unreached_parameters_get_zero_gradients() {
        let mut g = ComputationGraph::new();
        let a = g.parameter("a", &[2]).unwrap();
        let _b = g.parameter("b", &[2]).unwrap();
        let l = g.unary(Op::Sum, a);
        let mut params = ParamStore::new();
        params.insert("a", Tensor::vector(vec![1.0, 2.0]));
        params.insert("b", Tensor::vector(vec![1.0, 2.0]));
        let tape = forward(&g, &params, &Feed::new()).unwrap();
        let grads = backward(&g, &tape, l).unwrap().parameters(&g);
        assert_eq!(grads["a"].data(), &[1.0, 1.0]);
        assert_eq!(grads["b"].data(), &[0.0, 0.0]);
    }
}
