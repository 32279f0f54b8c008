use std::collections::HashMap;

use serde::Serialize;

use crate::expr::Expr;
use crate::grid::Axis;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct NodeId(pub u32);

impl NodeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// What a division does when its denominator is exactly zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum DivGuard {
    /// Report an error; no epsilon regularization.
    Strict,
}

/// One node of a field DAG. Children always have smaller ids than their parents.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Node {
    Const(f64),
    /// Expression in `x`, `y`.
    Data(Expr),
    /// Distance function of a segment (squared for the vanishing-gradient variant).
    Phi(usize),
    /// Gradient component of the true segment distance.
    PhiGrad(usize, Axis),
    PhiBar(usize),
    PhiBarGrad(usize, Axis),
    /// Distance to an intersection point.
    PointDist(usize),
    /// Transfinite weight `index` over `(segment, exponent)` terms.
    Weight { terms: Vec<(usize, u32)>, index: usize },
    /// `∏ phi_i^mu_i`.
    DistProduct(Vec<(usize, u32)>),
    Slot(usize),
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Div(NodeId, NodeId, DivGuard),
    Neg(NodeId),
    /// Child evaluated at the orthogonal projection onto a segment's line.
    Project { child: NodeId, segment: usize },
    /// Spatial derivative of the child field.
    Grad { child: NodeId, axis: Axis },
}

impl Node {
    pub fn children(&self) -> Vec<NodeId> {
        match self {
            Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b, _) => vec![*a, *b],
            Node::Neg(a) => vec![*a],
            Node::Project { child, .. } | Node::Grad { child, .. } => vec![*child],
            _ => Vec::new(),
        }
    }
}

/// Hash-consed arena of field nodes with light constant folding.
#[derive(Debug, Clone, Default, Serialize)]
pub struct FieldGraph {
    nodes: Vec<Node>,
    #[serde(skip)]
    slot_dependent: Vec<bool>,
    #[serde(skip)]
    interned: HashMap<String, NodeId>,
}

impl FieldGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id.index()]
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    /// Whether the node's value depends on any slot.
    pub fn depends_on_slots(&self, id: NodeId) -> bool {
        self.slot_dependent[id.index()]
    }

    fn push(&mut self, n: Node) -> NodeId {
        let key = format!("{n:?}");
        if let Some(&id) = self.interned.get(&key) {
            return id;
        }
        let dep = match &n {
            Node::Slot(_) => true,
            other => other
                .children()
                .iter()
                .any(|c| self.slot_dependent[c.index()]),
        };
        let id = NodeId(self.nodes.len() as u32);
        self.nodes.push(n);
        self.slot_dependent.push(dep);
        self.interned.insert(key, id);
        id
    }

    pub fn as_const(&self, id: NodeId) -> Option<f64> {
        match self.node(id) {
            Node::Const(v) => Some(*v),
            _ => None,
        }
    }

    pub fn constant(&mut self, v: f64) -> NodeId {
        self.push(Node::Const(v))
    }

    pub fn data(&mut self, e: &Expr) -> NodeId {
        match e.as_constant() {
            Some(v) => self.constant(v),
            None => self.push(Node::Data(e.clone())),
        }
    }

    pub fn phi(&mut self, seg: usize) -> NodeId {
        self.push(Node::Phi(seg))
    }

    pub fn phi_grad(&mut self, seg: usize, axis: Axis) -> NodeId {
        self.push(Node::PhiGrad(seg, axis))
    }

    pub fn phi_bar(&mut self, seg: usize) -> NodeId {
        self.push(Node::PhiBar(seg))
    }

    pub fn phi_bar_grad(&mut self, seg: usize, axis: Axis) -> NodeId {
        self.push(Node::PhiBarGrad(seg, axis))
    }

    pub fn point_dist(&mut self, point: usize) -> NodeId {
        self.push(Node::PointDist(point))
    }

    pub fn weight(&mut self, terms: Vec<(usize, u32)>, index: usize) -> NodeId {
        if terms.len() == 1 {
            return self.constant(1.0);
        }
        self.push(Node::Weight { terms, index })
    }

    pub fn dist_product(&mut self, terms: Vec<(usize, u32)>) -> NodeId {
        if terms.is_empty() {
            return self.constant(1.0);
        }
        self.push(Node::DistProduct(terms))
    }

    pub fn slot(&mut self, k: usize) -> NodeId {
        self.push(Node::Slot(k))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        match (self.as_const(a), self.as_const(b)) {
            (Some(x), Some(y)) => self.constant(x + y),
            (Some(0.0), _) => b,
            (_, Some(0.0)) => a,
            _ => self.push(Node::Add(a, b)),
        }
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> NodeId {
        match (self.as_const(a), self.as_const(b)) {
            (Some(x), Some(y)) => self.constant(x - y),
            (_, Some(0.0)) => a,
            (Some(0.0), _) => self.neg(b),
            _ => self.push(Node::Sub(a, b)),
        }
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        match (self.as_const(a), self.as_const(b)) {
            (Some(x), Some(y)) => self.constant(x * y),
            (Some(0.0), _) => self.constant(0.0),
            (_, Some(0.0)) => self.constant(0.0),
            (Some(1.0), _) => b,
            (_, Some(1.0)) => a,
            _ => self.push(Node::Mul(a, b)),
        }
    }

    pub fn div(&mut self, a: NodeId, b: NodeId) -> NodeId {
        match (self.as_const(a), self.as_const(b)) {
            (Some(0.0), _) => self.constant(0.0),
            (_, Some(1.0)) => a,
            (Some(x), Some(y)) if y != 0.0 => self.constant(x / y),
            _ => self.push(Node::Div(a, b, DivGuard::Strict)),
        }
    }

    pub fn neg(&mut self, a: NodeId) -> NodeId {
        match self.node(a).clone() {
            Node::Const(v) => self.constant(-v),
            Node::Neg(inner) => inner,
            _ => self.push(Node::Neg(a)),
        }
    }

    /// Linear combination `Σ c_k x_k`.
    pub fn sum(&mut self, terms: &[NodeId]) -> NodeId {
        let mut acc = self.constant(0.0);
        for &t in terms {
            acc = self.add(acc, t);
        }
        acc
    }

    pub fn scale(&mut self, c: f64, a: NodeId) -> NodeId {
        let k = self.constant(c);
        self.mul(k, a)
    }

    pub fn project(&mut self, child: NodeId, segment: usize) -> NodeId {
        if self.as_const(child).is_some() {
            return child;
        }
        self.push(Node::Project { child, segment })
    }

    pub fn grad(&mut self, child: NodeId, axis: Axis) -> NodeId {
        if self.as_const(child).is_some() {
            return self.constant(0.0);
        }
        self.push(Node::Grad { child, axis })
    }

    /// `∇phi_bar · ∇f` for a segment.
    pub fn normal_dot_grad(&mut self, seg: usize, f: NodeId) -> NodeId {
        let nx = self.phi_bar_grad(seg, Axis::X);
        let ny = self.phi_bar_grad(seg, Axis::Y);
        let fx = self.grad(f, Axis::X);
        let fy = self.grad(f, Axis::Y);
        let a = self.mul(nx, fx);
        let b = self.mul(ny, fy);
        self.add(a, b)
    }

    /// Slots reachable from `root`.
    pub fn slots_used(&self, root: NodeId) -> Vec<usize> {
        let mut seen = vec![false; self.nodes.len()];
        let mut stack = vec![root];
        let mut out = Vec::new();
        while let Some(id) = stack.pop() {
            if std::mem::replace(&mut seen[id.index()], true) {
                continue;
            }
            if let Node::Slot(k) = self.node(id) {
                out.push(*k);
            }
            stack.extend(self.node(id).children());
        }
        out.sort_unstable();
        out.dedup();
        out
    }

    /// A chain of node ids from one of `roots` down to `target`, if reachable.
    pub fn path_to(&self, roots: &[NodeId], target: NodeId) -> Option<Vec<NodeId>> {
        let mut parent: HashMap<NodeId, NodeId> = HashMap::new();
        let mut stack: Vec<NodeId> = roots.to_vec();
        let mut seen = vec![false; self.nodes.len()];
        while let Some(id) = stack.pop() {
            if std::mem::replace(&mut seen[id.index()], true) {
                continue;
            }
            if id == target {
                let mut path = vec![id];
                let mut cur = id;
                while let Some(&p) = parent.get(&cur) {
                    path.push(p);
                    cur = p;
                }
                path.reverse();
                return Some(path);
            }
            for c in self.node(id).children() {
                parent.entry(c).or_insert(id);
                stack.push(c);
            }
        }
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn folding_and_interning() {
        let mut g = FieldGraph::new();
        let z = g.constant(0.0);
        let s = g.slot(0);
        assert_eq!(g.add(z, s), s);
        assert_eq!(g.mul(s, z), z);
        let p = g.phi(1);
        assert_eq!(g.phi(1), p);
        let a = g.mul(p, s);
        let b = g.mul(p, s);
        assert_eq!(a, b);
        assert!(g.depends_on_slots(a));
        assert!(!g.depends_on_slots(p));
        assert_eq!(g.slots_used(a), vec![0]);
        let two = g.constant(2.0);
        let three = g.constant(3.0);
        let six = g.mul(two, three);
        assert_eq!(g.as_const(six), Some(6.0));
        let path = g.path_to(&[a], s).unwrap();
        assert_eq!(path, vec![a, s]);
    }
}
