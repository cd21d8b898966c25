use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tensor::{numel, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub usize);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

/// Coefficient applied by a scatter-add before accumulation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scale {
    Fixed(f64),
    /// `sign * (max(base) - min(base) + margin)`, recomputed every forward
    /// pass and treated as a constant by backward.
    Hard { sign: f64, margin: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "kebab-case")]
pub enum Op {
    Input,
    Parameter,
    Constant { value: Tensor },
    MatMul,
    /// Elementwise; the second operand may broadcast over leading axes.
    Add,
    Mul,
    /// `scale * x + shift`.
    Affine { scale: f64, shift: f64 },
    /// `min(hi, x)`.
    MinClamp { hi: f64 },
    /// `max(lo, x)`.
    MaxClamp { lo: f64 },
    /// Sum of all elements.
    Sum,
    /// Over the last axis.
    Softmax,
    Sigmoid,
    Tanh,
    Relu,
    Concat { axis: usize },
    Slice { axis: usize, start: usize, len: usize },
    Transpose,
    /// Serialized as `to`, since `shape` is taken by the node record.
    Reshape {
        #[serde(rename = "to")]
        shape: Vec<usize>,
    },
    /// Pick flat elements into a vector.
    Gather { indices: Vec<usize> },
    /// `out = base; out[indices[k]] += scale * values[k]`.
    ScatterAdd { indices: Vec<usize>, scale: Scale },
    StopGradient,
    /// Summed negative log-likelihood of per-row gold classes; `None` rows are masked.
    Nll { targets: Vec<Option<usize>> },
}

impl Op {
    pub fn kind(&self) -> &'static str {
        match self {
            Op::Input => "input",
            Op::Parameter => "parameter",
            Op::Constant { .. } => "constant",
            Op::MatMul => "matmul",
            Op::Add => "add",
            Op::Mul => "mul",
            Op::Affine { .. } => "affine",
            Op::MinClamp { .. } => "min-clamp",
            Op::MaxClamp { .. } => "max-clamp",
            Op::Sum => "sum",
            Op::Softmax => "softmax",
            Op::Sigmoid => "sigmoid",
            Op::Tanh => "tanh",
            Op::Relu => "relu",
            Op::Concat { .. } => "concat",
            Op::Slice { .. } => "slice",
            Op::Transpose => "transpose",
            Op::Reshape { .. } => "reshape",
            Op::Gather { .. } => "gather",
            Op::ScatterAdd { .. } => "scatter-add",
            Op::StopGradient => "stop-gradient",
            Op::Nll { .. } => "nll",
        }
    }

    /// Shape-preserving activations a rule may target through their pre-activation input.
    pub fn is_activation(&self) -> bool {
        matches!(self, Op::Softmax | Op::Sigmoid | Op::Tanh | Op::Relu)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeRecord {
    #[serde(flatten)]
    pub op: Op,
    #[serde(default)]
    pub inputs: Vec<NodeId>,
    pub shape: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    /// Optional per-axis labels, so rule constants like `"B-VP"` can address an element.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub axis_labels: Vec<Option<Vec<String>>>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GraphError {
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
    #[error("unknown neuron name `{0}`")]
    UnknownNeuronName(String),
    #[error("name `{0}` is already registered")]
    DuplicateName(String),
    #[error("{op}: {detail}")]
    ShapeMismatch { op: &'static str, detail: String },
    #[error("node {node} references input {input} that is not defined before it")]
    ForwardReference { node: usize, input: NodeId },
    #[error("node {node} declares shape {declared:?} but its op produces {inferred:?}")]
    DeclaredShape {
        node: usize,
        declared: Vec<usize>,
        inferred: Vec<usize>,
    },
}

fn mismatch(op: &Op, detail: String) -> GraphError {
    GraphError::ShapeMismatch {
        op: op.kind(),
        detail,
    }
}

/// Infer the output shape of `op` applied to inputs of the given shapes.
pub fn infer_shape(op: &Op, inputs: &[&[usize]], declared: Option<&[usize]>) -> Result<Vec<usize>, GraphError> {
    let arity = |n: usize| -> Result<(), GraphError> {
        if inputs.len() == n {
            Ok(())
        } else {
            Err(mismatch(op, format!("expected {n} input(s), got {}", inputs.len())))
        }
    };
    match op {
        Op::Input | Op::Parameter => {
            arity(0)?;
            declared
                .map(|d| d.to_vec())
                .ok_or_else(|| mismatch(op, "leaf nodes need a declared shape".into()))
        }
        Op::Constant { value } => {
            arity(0)?;
            Ok(value.shape().to_vec())
        }
        Op::MatMul => {
            arity(2)?;
            let (a, b) = (inputs[0], inputs[1]);
            if a.len() != 2 || b.len() != 2 || a[1] != b[0] {
                return Err(mismatch(op, format!("cannot multiply {a:?} by {b:?}")));
            }
            Ok(vec![a[0], b[1]])
        }
        Op::Add => {
            arity(2)?;
            let (a, b) = (inputs[0], inputs[1]);
            if b.len() <= a.len() && a[a.len() - b.len()..] == *b {
                Ok(a.to_vec())
            } else {
                Err(mismatch(op, format!("cannot broadcast {b:?} onto {a:?}")))
            }
        }
        Op::Mul => {
            arity(2)?;
            if inputs[0] != inputs[1] {
                return Err(mismatch(op, format!("{:?} vs {:?}", inputs[0], inputs[1])));
            }
            Ok(inputs[0].to_vec())
        }
        Op::Affine { .. }
        | Op::MinClamp { .. }
        | Op::MaxClamp { .. }
        | Op::Sigmoid
        | Op::Tanh
        | Op::Relu
        | Op::StopGradient => {
            arity(1)?;
            Ok(inputs[0].to_vec())
        }
        Op::Softmax => {
            arity(1)?;
            if inputs[0].is_empty() {
                return Err(mismatch(op, "softmax needs at least one axis".into()));
            }
            Ok(inputs[0].to_vec())
        }
        Op::Sum => {
            arity(1)?;
            Ok(Vec::new())
        }
        Op::Concat { axis } => {
            if inputs.is_empty() {
                return Err(mismatch(op, "no inputs".into()));
            }
            let first = inputs[0];
            if *axis >= first.len() {
                return Err(mismatch(op, format!("axis {axis} out of range for {first:?}")));
            }
            let mut out = first.to_vec();
            for s in &inputs[1..] {
                let compatible = s.len() == first.len()
                    && s.iter()
                        .zip(first.iter())
                        .enumerate()
                        .all(|(i, (x, y))| i == *axis || x == y);
                if !compatible {
                    return Err(mismatch(op, format!("{s:?} does not match {first:?}")));
                }
                out[*axis] += s[*axis];
            }
            Ok(out)
        }
        Op::Slice { axis, start, len } => {
            arity(1)?;
            let s = inputs[0];
            if *axis >= s.len() || start + len > s[*axis] {
                return Err(mismatch(op, format!("slice {start}+{len} on axis {axis} of {s:?}")));
            }
            let mut out = s.to_vec();
            out[*axis] = *len;
            Ok(out)
        }
        Op::Transpose => {
            arity(1)?;
            let s = inputs[0];
            if s.len() != 2 {
                return Err(mismatch(op, format!("expected a matrix, got {s:?}")));
            }
            Ok(vec![s[1], s[0]])
        }
        Op::Reshape { shape } => {
            arity(1)?;
            if numel(shape) != numel(inputs[0]) {
                return Err(mismatch(op, format!("{:?} -> {shape:?}", inputs[0])));
            }
            Ok(shape.clone())
        }
        Op::Gather { indices } => {
            arity(1)?;
            let n = numel(inputs[0]);
            if let Some(bad) = indices.iter().find(|&&i| i >= n) {
                return Err(mismatch(op, format!("index {bad} out of range {n}")));
            }
            Ok(vec![indices.len()])
        }
        Op::ScatterAdd { indices, .. } => {
            arity(2)?;
            let n = numel(inputs[0]);
            if inputs[1] != [indices.len()] {
                return Err(mismatch(
                    op,
                    format!("values {:?} do not match {} indices", inputs[1], indices.len()),
                ));
            }
            if let Some(bad) = indices.iter().find(|&&i| i >= n) {
                return Err(mismatch(op, format!("index {bad} out of range {n}")));
            }
            Ok(inputs[0].to_vec())
        }
        Op::Nll { targets } => {
            arity(1)?;
            let s = inputs[0];
            if s.len() != 2 || s[0] != targets.len() {
                return Err(mismatch(
                    op,
                    format!("{s:?} does not match {} targets", targets.len()),
                ));
            }
            if let Some(bad) = targets.iter().flatten().find(|&&t| t >= s[1]) {
                return Err(mismatch(op, format!("class {bad} out of range {}", s[1])));
            }
            Ok(Vec::new())
        }
    }
}

/// A directed acyclic computation graph, built in topological order.
///
/// Every node may only consume nodes created before it, so the edge relation is
/// acyclic by construction and `NodeId` order is a valid evaluation order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ComputationGraph {
    nodes: Vec<NodeRecord>,
    consumers: Vec<Vec<NodeId>>,
    name_index: HashMap<String, NodeId>,
    outputs: BTreeMap<String, NodeId>,
}

impl ComputationGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[NodeRecord] {
        &self.nodes
    }

    pub fn ids(&self) -> impl Iterator<Item = NodeId> {
        (0..self.nodes.len()).map(NodeId)
    }

    pub fn node(&self, id: NodeId) -> Result<&NodeRecord, GraphError> {
        self.nodes.get(id.0).ok_or(GraphError::UnknownNode(id))
    }

    pub fn check(&self, id: NodeId) -> Result<(), GraphError> {
        self.node(id).map(|_| ())
    }

    pub fn shape(&self, id: NodeId) -> &[usize] {
        &self.nodes[id.0].shape
    }

    pub fn consumers(&self, id: NodeId) -> &[NodeId] {
        &self.consumers[id.0]
    }

    /// Append a node, inferring its shape.
    pub fn add(&mut self, op: Op, inputs: &[NodeId]) -> Result<NodeId, GraphError> {
        self.add_with_shape(op, inputs, None)
    }

    fn add_with_shape(
        &mut self,
        op: Op,
        inputs: &[NodeId],
        declared: Option<&[usize]>,
    ) -> Result<NodeId, GraphError> {
        for &i in inputs {
            self.check(i)?;
        }
        let shapes: Vec<&[usize]> = inputs.iter().map(|&i| self.shape(i)).collect();
        let shape = infer_shape(&op, &shapes, declared)?;
        Ok(self.push(NodeRecord {
            op,
            inputs: inputs.to_vec(),
            shape,
            name: None,
            axis_labels: Vec::new(),
        }))
    }

    fn push(&mut self, record: NodeRecord) -> NodeId {
        let id = NodeId(self.nodes.len());
        for &i in &record.inputs {
            self.consumers[i.0].push(id);
        }
        self.nodes.push(record);
        self.consumers.push(Vec::new());
        id
    }

    /// Append a record read from elsewhere, validating references and shape.
    pub fn push_record(&mut self, record: NodeRecord) -> Result<NodeId, GraphError> {
        let index = self.nodes.len();
        for &i in &record.inputs {
            if i.0 >= index {
                return Err(GraphError::ForwardReference { node: index, input: i });
            }
        }
        let shapes: Vec<&[usize]> = record.inputs.iter().map(|&i| self.shape(i)).collect();
        let inferred = infer_shape(&record.op, &shapes, Some(&record.shape))?;
        if inferred != record.shape {
            return Err(GraphError::DeclaredShape {
                node: index,
                declared: record.shape,
                inferred,
            });
        }
        let name = record.name.clone();
        let labels = record.axis_labels.clone();
        let id = self.push(NodeRecord {
            name: None,
            axis_labels: Vec::new(),
            ..record
        });
        if let Some(n) = name {
            self.set_name(id, &n)?;
        }
        for (axis, l) in labels.into_iter().enumerate() {
            if let Some(l) = l {
                self.set_axis_labels(id, axis, l)?;
            }
        }
        Ok(id)
    }

    pub fn input(&mut self, name: &str, shape: &[usize]) -> Result<NodeId, GraphError> {
        let id = self.add_with_shape(Op::Input, &[], Some(shape))?;
        self.set_name(id, name)?;
        Ok(id)
    }

    pub fn parameter(&mut self, name: &str, shape: &[usize]) -> Result<NodeId, GraphError> {
        let id = self.add_with_shape(Op::Parameter, &[], Some(shape))?;
        self.set_name(id, name)?;
        Ok(id)
    }

    pub fn constant(&mut self, value: Tensor) -> NodeId {
        self.add(Op::Constant { value }, &[])
            .expect("constants always have a shape")
    }

    pub fn set_name(&mut self, id: NodeId, name: &str) -> Result<(), GraphError> {
        self.check(id)?;
        if self.name_index.contains_key(name) {
            return Err(GraphError::DuplicateName(name.to_string()));
        }
        if let Some(old) = self.nodes[id.0].name.take() {
            self.name_index.remove(&old);
        }
        self.nodes[id.0].name = Some(name.to_string());
        self.name_index.insert(name.to_string(), id);
        Ok(())
    }

    pub fn set_axis_labels(&mut self, id: NodeId, axis: usize, labels: Vec<String>) -> Result<(), GraphError> {
        let node = self.nodes.get_mut(id.0).ok_or(GraphError::UnknownNode(id))?;
        if axis >= node.shape.len() || node.shape[axis] != labels.len() {
            return Err(GraphError::ShapeMismatch {
                op: "axis-labels",
                detail: format!("{} labels for axis {axis} of {:?}", labels.len(), node.shape),
            });
        }
        if node.axis_labels.len() <= axis {
            node.axis_labels.resize(axis + 1, None);
        }
        node.axis_labels[axis] = Some(labels);
        Ok(())
    }

    pub fn lookup(&self, name: &str) -> Result<NodeId, GraphError> {
        self.name_index
            .get(name)
            .copied()
            .ok_or_else(|| GraphError::UnknownNeuronName(name.to_string()))
    }

    pub fn names(&self) -> impl Iterator<Item = (&str, NodeId)> {
        self.name_index.iter().map(|(k, v)| (k.as_str(), *v))
    }

    /// Tag a node with a role such as `"loss"` or `"prediction"`.
    pub fn set_output(&mut self, role: &str, id: NodeId) -> Result<(), GraphError> {
        self.check(id)?;
        self.outputs.insert(role.to_string(), id);
        Ok(())
    }

    pub fn output(&self, role: &str) -> Option<NodeId> {
        self.outputs.get(role).copied()
    }

    pub fn outputs(&self) -> &BTreeMap<String, NodeId> {
        &self.outputs
    }

    pub fn parameters(&self) -> impl Iterator<Item = (NodeId, &NodeRecord)> {
        self.nodes
            .iter()
            .enumerate()
            .filter(|(_, n)| n.op == Op::Parameter)
            .map(|(i, n)| (NodeId(i), n))
    }

    /// Number of trainable scalars.
    pub fn parameter_count(&self) -> usize {
        self.parameters().map(|(_, n)| numel(&n.shape)).sum()
    }

    // Convenience builders used by the model constructors.

    pub fn op(&mut self, op: Op, inputs: &[NodeId]) -> NodeId {
        self.add(op, inputs)
            .unwrap_or_else(|e| panic!("model construction bug: {e}"))
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.op(Op::MatMul, &[a, b])
    }

    pub fn add2(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.op(Op::Add, &[a, b])
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.op(Op::Mul, &[a, b])
    }

    pub fn affine(&mut self, x: NodeId, scale: f64, shift: f64) -> NodeId {
        self.op(Op::Affine { scale, shift }, &[x])
    }

    pub fn unary(&mut self, op: Op, x: NodeId) -> NodeId {
        self.op(op, &[x])
    }
}
