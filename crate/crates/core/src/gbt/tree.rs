use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Side taken by samples whose split feature is missing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Left,
    Right,
}

pub type NodeId = usize;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Node {
    /// Samples with `x[feature] <= threshold` go left.
    Internal {
        feature: usize,
        threshold: f64,
        default: Direction,
        left: NodeId,
        right: NodeId,
    },
    Leaf {
        weight: f64,
    },
}

/// A CART regression tree stored as a flat node array rooted at index 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TreeRepr", into = "TreeRepr")]
pub struct Tree {
    nodes: Vec<Node>,
    depth: usize,
}

#[derive(Serialize, Deserialize)]
struct TreeRepr {
    nodes: Vec<Node>,
}

impl TryFrom<TreeRepr> for Tree {
    type Error = Error;

    fn try_from(repr: TreeRepr) -> Result<Self> {
        Tree::from_nodes(repr.nodes)
    }
}

impl From<Tree> for TreeRepr {
    fn from(tree: Tree) -> Self {
        TreeRepr { nodes: tree.nodes }
    }
}

impl Tree {
    pub fn leaf(weight: f64) -> Self {
        Tree {
            nodes: vec![Node::Leaf { weight }],
            depth: 0,
        }
    }

    /// Builds a tree from its node array, checking that it forms a strict
    /// binary tree rooted at node 0 in which every node is reached once.
    pub fn from_nodes(nodes: Vec<Node>) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::Structural("tree has no nodes".into()));
        }
        let mut seen = vec![false; nodes.len()];
        let mut depth = 0;
        let mut stack = vec![(0usize, 0usize)];
        while let Some((id, d)) = stack.pop() {
            if seen[id] {
                return Err(Error::Structural(format!("node {id} reached twice")));
            }
            seen[id] = true;
            depth = depth.max(d);
            if let Node::Internal { left, right, .. } = nodes[id] {
                for child in [left, right] {
                    if child >= nodes.len() {
                        return Err(Error::Structural(format!("node {id} references missing child {child}")));
                    }
                    stack.push((child, d + 1));
                }
            }
        }
        if let Some(orphan) = seen.iter().position(|s| !s) {
            return Err(Error::Structural(format!("node {orphan} is unreachable")));
        }
        Ok(Tree { nodes, depth })
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn root(&self) -> NodeId {
        0
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }

    pub fn n_internal(&self) -> usize {
        self.nodes.len() - self.n_leaves()
    }

    /// Largest feature index used by any split, if the tree has splits.
    pub fn max_feature(&self) -> Option<usize> {
        self.nodes
            .iter()
            .filter_map(|n| match n {
                Node::Internal { feature, .. } => Some(*feature),
                Node::Leaf { .. } => None,
            })
            .max()
    }

    /// Leaf reached by `features`; NaN entries are treated as missing.
    pub fn leaf_index(&self, features: &[f64]) -> NodeId {
        let mut id = 0;
        loop {
            match self.nodes[id] {
                Node::Leaf { .. } => return id,
                Node::Internal {
                    feature,
                    threshold,
                    default,
                    left,
                    right,
                } => {
                    let x = features[feature];
                    let go_left = if x.is_nan() {
                        default == Direction::Left
                    } else {
                        x <= threshold
                    };
                    id = if go_left { left } else { right };
                }
            }
        }
    }

    pub fn predict(&self, features: &[f64]) -> f64 {
        match self.nodes[self.leaf_index(features)] {
            Node::Leaf { weight } => weight,
            Node::Internal { .. } => unreachable!("leaf_index returns a leaf"),
        }
    }
}
