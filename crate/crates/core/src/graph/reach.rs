use std::collections::{BTreeSet, HashMap};

use super::ir::{ComputationGraph, GraphError, NodeId};

/// Outcome of checking a statement against a graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cyclicity {
    Acyclic,
    /// `consequent` is upstream of (or identical to) `antecedent`.
    Cyclic {
        consequent: NodeId,
        antecedent: NodeId,
    },
}

impl Cyclicity {
    pub fn is_cyclic(&self) -> bool {
        matches!(self, Cyclicity::Cyclic { .. })
    }
}

/// Memoized forward closure for a batch of reachability queries.
pub struct Reachability<'g> {
    graph: &'g ComputationGraph,
    closure: HashMap<NodeId, Vec<bool>>,
}

impl<'g> Reachability<'g> {
    pub fn new(graph: &'g ComputationGraph) -> Self {
        Reachability {
            graph,
            closure: HashMap::new(),
        }
    }

    /// Nodes reachable from `a` by a path of length >= 1.
    fn descendants(&mut self, a: NodeId) -> &[bool] {
        let graph = self.graph;
        self.closure.entry(a).or_insert_with(|| {
            let mut seen = vec![false; graph.len()];
            let mut stack: Vec<NodeId> = graph.consumers(a).to_vec();
            while let Some(n) = stack.pop() {
                if !seen[n.0] {
                    seen[n.0] = true;
                    stack.extend_from_slice(graph.consumers(n));
                }
            }
            seen
        })
    }

    pub fn is_upstream(&mut self, a: NodeId, b: NodeId) -> Result<bool, GraphError> {
        self.graph.check(a)?;
        self.graph.check(b)?;
        Ok(self.descendants(a)[b.0])
    }
}

impl ComputationGraph {
    /// True iff a directed path of length at least one leads from `a` to `b`.
    pub fn is_upstream(&self, a: NodeId, b: NodeId) -> Result<bool, GraphError> {
        Reachability::new(self).is_upstream(a, b)
    }

    /// A statement is cyclic when some consequent node is upstream of some
    /// antecedent node. A node appearing on both sides counts as cyclic too,
    /// since augmenting it would feed the node into itself.
    pub fn check_cyclicity(
        &self,
        antecedent: &[NodeId],
        consequent: &[NodeId],
    ) -> Result<Cyclicity, GraphError> {
        let mut reach = Reachability::new(self);
        for &r in consequent {
            for &l in antecedent {
                if r == l || reach.is_upstream(r, l)? {
                    return Ok(Cyclicity::Cyclic {
                        consequent: r,
                        antecedent: l,
                    });
                }
            }
        }
        Ok(Cyclicity::Acyclic)
    }

    /// Name-based variant of [`check_cyclicity`](Self::check_cyclicity).
    pub fn check_cyclicity_by_name(
        &self,
        antecedent: &[&str],
        consequent: &[&str],
    ) -> Result<Cyclicity, GraphError> {
        let l = antecedent
            .iter()
            .map(|n| self.lookup(n))
            .collect::<Result<Vec<_>, _>>()?;
        let r = consequent
            .iter()
            .map(|n| self.lookup(n))
            .collect::<Result<Vec<_>, _>>()?;
        self.check_cyclicity(&l, &r)
    }

    /// Kahn's algorithm with ties broken by smallest `NodeId`.
    pub fn topological_order(&self) -> Vec<NodeId> {
        let mut indegree: Vec<usize> = self.nodes().iter().map(|n| n.inputs.len()).collect();
        let mut ready: BTreeSet<NodeId> = self.ids().filter(|id| indegree[id.0] == 0).collect();
        let mut order = Vec::with_capacity(self.len());
        while let Some(n) = ready.pop_first() {
            order.push(n);
            for &c in self.consumers(n) {
                indegree[c.0] -= 1;
                if indegree[c.0] == 0 {
                    ready.insert(c);
                }
            }
        }
        order
    }
}
