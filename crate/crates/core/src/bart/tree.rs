//! Binary regression trees stored in an index arena.

use crate::error::{Error, Result};

pub type NodeId = usize;

/// Rows with `x[var] < value` go left.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SplitRule {
    pub var: usize,
    pub value: f64,
}

impl SplitRule {
    #[inline]
    pub fn goes_left(&self, x: &[f64]) -> bool {
        x[self.var] < self.value
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum NodeKind {
    Leaf {
        mu: f64,
    },
    Split {
        rule: SplitRule,
        left: NodeId,
        right: NodeId,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Node {
    pub kind: NodeKind,
    pub parent: Option<NodeId>,
    pub depth: usize,
}

/// Shape-and-parameter view of a tree in preorder, independent of arena layout.
#[derive(Clone, Debug, PartialEq)]
pub enum Shape {
    Leaf(f64),
    Split(SplitRule),
}

#[derive(Clone, Debug)]
pub struct DecisionTree {
    nodes: Vec<Node>,
    free: Vec<NodeId>,
}

impl DecisionTree {
    pub const ROOT: NodeId = 0;

    pub fn stump(mu: f64) -> Self {
        Self {
            nodes: vec![Node {
                kind: NodeKind::Leaf { mu },
                parent: None,
                depth: 0,
            }],
            free: Vec::new(),
        }
    }

    /// Arena capacity; node ids are below this bound.
    pub fn capacity(&self) -> usize {
        self.nodes.len()
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id]
    }

    pub fn is_leaf(&self, id: NodeId) -> bool {
        matches!(self.nodes[id].kind, NodeKind::Leaf { .. })
    }

    pub fn children(&self, id: NodeId) -> Option<(NodeId, NodeId)> {
        match self.nodes[id].kind {
            NodeKind::Split { left, right, .. } => Some((left, right)),
            NodeKind::Leaf { .. } => None,
        }
    }

    pub fn rule(&self, id: NodeId) -> Option<SplitRule> {
        match self.nodes[id].kind {
            NodeKind::Split { rule, .. } => Some(rule),
            NodeKind::Leaf { .. } => None,
        }
    }

    pub fn mu(&self, id: NodeId) -> f64 {
        match self.nodes[id].kind {
            NodeKind::Leaf { mu } => mu,
            NodeKind::Split { .. } => panic!("node {id} is not a leaf"),
        }
    }

    pub fn set_mu(&mut self, id: NodeId, value: f64) {
        match &mut self.nodes[id].kind {
            NodeKind::Leaf { mu } => *mu = value,
            NodeKind::Split { .. } => panic!("node {id} is not a leaf"),
        }
    }

    pub fn set_rule(&mut self, id: NodeId, new: SplitRule) {
        match &mut self.nodes[id].kind {
            NodeKind::Split { rule, .. } => *rule = new,
            NodeKind::Leaf { .. } => panic!("node {id} is not a split"),
        }
    }

    /// Live node ids in preorder.
    pub fn preorder(&self) -> Vec<NodeId> {
        let mut out = Vec::new();
        let mut stack = vec![Self::ROOT];
        while let Some(id) = stack.pop() {
            out.push(id);
            if let Some((l, r)) = self.children(id) {
                stack.push(r);
                stack.push(l);
            }
        }
        out
    }

    pub fn leaves(&self) -> Vec<NodeId> {
        self.preorder()
            .into_iter()
            .filter(|&i| self.is_leaf(i))
            .collect()
    }

    pub fn interior(&self) -> Vec<NodeId> {
        self.preorder()
            .into_iter()
            .filter(|&i| !self.is_leaf(i))
            .collect()
    }

    /// Split nodes whose two children are both leaves.
    pub fn prunable(&self) -> Vec<NodeId> {
        self.interior()
            .into_iter()
            .filter(|&i| {
                let (l, r) = self.children(i).unwrap();
                self.is_leaf(l) && self.is_leaf(r)
            })
            .collect()
    }

    /// (parent, child) pairs of split nodes.
    pub fn swappable(&self) -> Vec<(NodeId, NodeId)> {
        let mut out = Vec::new();
        for i in self.interior() {
            let (l, r) = self.children(i).unwrap();
            for c in [l, r] {
                if !self.is_leaf(c) {
                    out.push((i, c));
                }
            }
        }
        out
    }

    pub fn leaf_count(&self) -> usize {
        self.leaves().len()
    }

    pub fn node_count(&self) -> usize {
        self.preorder().len()
    }

    /// Depth of the deepest leaf.
    pub fn depth(&self) -> usize {
        self.leaves()
            .iter()
            .map(|&l| self.nodes[l].depth)
            .max()
            .unwrap_or(0)
    }

    /// True if `node` lies in the subtree rooted at `ancestor`.
    pub fn is_descendant(&self, mut node: NodeId, ancestor: NodeId) -> bool {
        loop {
            if node == ancestor {
                return true;
            }
            match self.nodes[node].parent {
                Some(p) => node = p,
                None => return false,
            }
        }
    }

    pub fn route(&self, x: &[f64]) -> NodeId {
        let mut id = Self::ROOT;
        loop {
            match self.nodes[id].kind {
                NodeKind::Leaf { .. } => return id,
                NodeKind::Split { rule, left, right } => {
                    id = if rule.goes_left(x) { left } else { right };
                }
            }
        }
    }

    /// Routes `x` starting from `from` instead of the root.
    pub fn route_from(&self, from: NodeId, x: &[f64]) -> NodeId {
        let mut id = from;
        while let NodeKind::Split { rule, left, right } = self.nodes[id].kind {
            id = if rule.goes_left(x) { left } else { right };
        }
        id
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        self.mu(self.route(x))
    }

    fn alloc(&mut self, node: Node) -> NodeId {
        match self.free.pop() {
            Some(id) => {
                self.nodes[id] = node;
                id
            }
            None => {
                self.nodes.push(node);
                self.nodes.len() - 1
            }
        }
    }

    /// Turns leaf `id` into a split with two new leaves; returns (left, right).
    pub fn grow(
        &mut self,
        id: NodeId,
        rule: SplitRule,
        mu_left: f64,
        mu_right: f64,
    ) -> (NodeId, NodeId) {
        assert!(self.is_leaf(id), "grow on non-leaf {id}");
        let depth = self.nodes[id].depth + 1;
        let left = self.alloc(Node {
            kind: NodeKind::Leaf { mu: mu_left },
            parent: Some(id),
            depth,
        });
        let right = self.alloc(Node {
            kind: NodeKind::Leaf { mu: mu_right },
            parent: Some(id),
            depth,
        });
        self.nodes[id].kind = NodeKind::Split { rule, left, right };
        (left, right)
    }

    /// Collapses split `id` whose children are leaves into a leaf with mean `mu`.
    pub fn prune(&mut self, id: NodeId, mu: f64) {
        let (l, r) = self.children(id).expect("prune on a leaf");
        assert!(
            self.is_leaf(l) && self.is_leaf(r),
            "prune needs terminal children"
        );
        self.free.push(r);
        self.free.push(l);
        self.nodes[id].kind = NodeKind::Leaf { mu };
    }

    /// Preorder listing of rules and leaf means.
    pub fn shape(&self) -> Vec<Shape> {
        self.preorder()
            .into_iter()
            .map(|i| match self.nodes[i].kind {
                NodeKind::Leaf { mu } => Shape::Leaf(mu),
                NodeKind::Split { rule, .. } => Shape::Split(rule),
            })
            .collect()
    }

    /// Preorder listing of rules only (leaf means ignored).
    pub fn structure(&self) -> Vec<Option<SplitRule>> {
        self.preorder().into_iter().map(|i| self.rule(i)).collect()
    }

    /// Checks parent links, depths and that every node has 0 or 2 children.
    pub fn validate(&self) -> Result<()> {
        for id in self.preorder() {
            let node = &self.nodes[id];
            if let Some((l, r)) = self.children(id) {
                for c in [l, r] {
                    let child = &self.nodes[c];
                    if child.parent != Some(id) || child.depth != node.depth + 1 {
                        return Err(Error::Numerical(format!(
                            "broken link between {id} and {c}"
                        )));
                    }
                }
                if l == r {
                    return Err(Error::Numerical(format!(
                        "node {id} has duplicate children"
                    )));
                }
            }
        }
        Ok(())
    }
}

impl PartialEq for DecisionTree {
    fn eq(&self, other: &Self) -> bool {
        self.shape() == other.shape()
    }
}
