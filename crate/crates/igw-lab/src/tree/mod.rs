//! Finite rooted trees: shapes, metric trees, geometry and serialization.
//!
//! Trees are stored as breadth-first arenas. Node 0 is the root, children of a
//! node occupy a contiguous index range, and every parent index is smaller than
//! its children's indices, so a reverse sweep visits vertices bottom-up.

mod canonical;
mod json;
mod newick;

use std::collections::VecDeque;
use std::ops::Range;

use thiserror::Error;

pub use json::{from_json, to_json};
pub use newick::{from_newick, to_newick};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TreeError {
    /// The requested point does not lie on the tree.
    #[error("point outside tree: {0}")]
    PointOutsideTree(String),
    /// Newick input could not be parsed.
    #[error("newick parse error at byte {pos}: {msg}")]
    Newick { pos: usize, msg: String },
    /// JSON input could not be parsed or violates the tree schema.
    #[error("json tree error: {0}")]
    Json(String),
    /// An edge length was not a positive finite number.
    #[error("invalid edge length {len} on edge {edge}")]
    InvalidLength { edge: usize, len: f64 },
}

/// Shape of a finite rooted tree, lengths dropped.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CombinatorialTree {
    parent: Vec<u32>,
    child_start: Vec<u32>,
}

/// A tree with positive edge lengths. Edge `c` joins `parent(c)` to `c`.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricTree {
    shape: CombinatorialTree,
    lengths: Vec<f64>,
}

/// A point on a metric tree: a vertex, or an interior point of the edge above
/// `edge` at distance `offset` from the parent end.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TreePoint {
    Vertex(usize),
    Edge { edge: usize, offset: f64 },
}

impl CombinatorialTree {
    /// The empty tree: a lone root.
    pub fn empty() -> Self {
        Self { parent: vec![0], child_start: vec![1, 1] }
    }

    /// Builds a tree from per-node child counts listed in breadth-first order.
    ///
    /// The counts must describe a tree: node `i`'s children get the next free
    /// indices. Trailing counts beyond the last created node are ignored.
    pub fn from_bfs_counts(counts: &[u32]) -> Self {
        let mut parent = vec![0u32];
        let mut child_start = Vec::with_capacity(counts.len() + 1);
        let mut next = 1u32;
        let mut i = 0usize;
        while i < parent.len() {
            child_start.push(next);
            let k = counts.get(i).copied().unwrap_or(0);
            for _ in 0..k {
                parent.push(i as u32);
            }
            next += k;
            i += 1;
        }
        child_start.push(next);
        Self { parent, child_start }
    }

    /// Builds a tree from child lists in any order, re-indexing breadth-first.
    /// Returns the tree and, for each new index, the original node id.
    pub fn from_children(children: &[Vec<usize>], root: usize) -> (Self, Vec<usize>) {
        let mut order = Vec::with_capacity(children.len());
        let mut counts = Vec::with_capacity(children.len());
        let mut queue = VecDeque::from([root]);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            counts.push(children[v].len() as u32);
            queue.extend(children[v].iter().copied());
        }
        (Self::from_bfs_counts(&counts), order)
    }

    pub fn node_count(&self) -> usize {
        self.parent.len()
    }

    pub fn edge_count(&self) -> usize {
        self.parent.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.parent.len() == 1
    }

    pub fn children(&self, v: usize) -> Range<usize> {
        self.child_start[v] as usize..self.child_start[v + 1] as usize
    }

    pub fn degree_out(&self, v: usize) -> usize {
        (self.child_start[v + 1] - self.child_start[v]) as usize
    }

    /// Parent of a non-root vertex. The root is its own parent.
    pub fn parent(&self, v: usize) -> usize {
        self.parent[v] as usize
    }

    pub fn is_leaf(&self, v: usize) -> bool {
        v != 0 && self.degree_out(v) == 0
    }

    pub fn leaf_count(&self) -> usize {
        (1..self.node_count()).filter(|&v| self.degree_out(v) == 0).count()
    }

    /// Root has degree one, or the tree is empty.
    pub fn is_planted(&self) -> bool {
        self.degree_out(0) <= 1
    }

    /// No non-root vertex has exactly one child.
    pub fn is_reduced(&self) -> bool {
        (1..self.node_count()).all(|v| self.degree_out(v) != 1)
    }

    /// Horton-Strahler order of each vertex's descendant tree, with leaves at 0.
    ///
    /// For an internal vertex the order combines the orders of its child edges
    /// (a leaf edge has order 1): the maximum, plus one if it is attained twice.
    pub fn strahler_values(&self) -> Vec<u32> {
        let n = self.node_count();
        let mut s = vec![0u32; n];
        for v in (0..n).rev() {
            let mut best = 0u32;
            let mut ties = 0u32;
            for c in self.children(v) {
                let e = s[c].max(1);
                if e > best {
                    best = e;
                    ties = 1;
                } else if e == best {
                    ties += 1;
                }
            }
            s[v] = if ties >= 2 { best + 1 } else { best };
        }
        s
    }

    /// Number of edges in the descendant tree of each vertex.
    pub fn subtree_edges(&self) -> Vec<usize> {
        let n = self.node_count();
        let mut e = vec![0usize; n];
        for v in (1..n).rev() {
            e[self.parent(v)] += e[v] + 1;
        }
        e
    }

    /// Structural consistency: parents precede children and child ranges
    /// are contiguous.
    pub fn is_well_formed(&self) -> bool {
        let n = self.node_count();
        if self.child_start.len() != n + 1 || self.child_start[0] != 1 {
            return false;
        }
        (1..n).all(|v| {
            let p = self.parent(v);
            p < v && self.children(p).contains(&v)
        })
    }

    /// Canonical isomorphism-invariant encoding of the shape.
    pub fn canonical_code(&self) -> Vec<u8> {
        canonical::root_code(self)
    }

    pub fn with_unit_lengths(&self) -> MetricTree {
        let mut lengths = vec![1.0; self.node_count()];
        lengths[0] = 0.0;
        MetricTree { shape: self.clone(), lengths }
    }
}

impl MetricTree {
    pub fn empty() -> Self {
        Self { shape: CombinatorialTree::empty(), lengths: vec![0.0] }
    }

    /// Attaches lengths to a shape. `lengths[0]` is ignored and set to zero.
    pub fn new(shape: CombinatorialTree, mut lengths: Vec<f64>) -> Result<Self, TreeError> {
        assert_eq!(shape.node_count(), lengths.len(), "one length per node");
        lengths[0] = 0.0;
        for (edge, &len) in lengths.iter().enumerate().skip(1) {
            if !(len > 0.0 && len.is_finite()) {
                return Err(TreeError::InvalidLength { edge, len });
            }
        }
        Ok(Self { shape, lengths })
    }

    /// Builds from child lists in any order; `lengths[v]` is the edge above `v`.
    pub fn from_children(children: &[Vec<usize>], lengths: &[f64], root: usize) -> Self {
        let (shape, order) = CombinatorialTree::from_children(children, root);
        let mut ls: Vec<f64> = order.iter().map(|&v| lengths[v]).collect();
        ls[0] = 0.0;
        Self { shape, lengths: ls }
    }

    pub fn shape(&self) -> &CombinatorialTree {
        &self.shape
    }

    pub fn into_shape(self) -> CombinatorialTree {
        self.shape
    }

    pub fn lengths(&self) -> &[f64] {
        &self.lengths
    }

    /// Length of the edge above `v`.
    pub fn len(&self, v: usize) -> f64 {
        self.lengths[v]
    }

    pub fn node_count(&self) -> usize {
        self.shape.node_count()
    }

    pub fn edge_count(&self) -> usize {
        self.shape.edge_count()
    }

    pub fn leaf_count(&self) -> usize {
        self.shape.leaf_count()
    }

    pub fn is_empty(&self) -> bool {
        self.shape.is_empty()
    }

    pub fn children(&self, v: usize) -> Range<usize> {
        self.shape.children(v)
    }

    pub fn parent(&self, v: usize) -> usize {
        self.shape.parent(v)
    }

    /// Distance from the root to each vertex.
    pub fn depths(&self) -> Vec<f64> {
        let n = self.node_count();
        let mut d = vec![0.0; n];
        for v in 1..n {
            d[v] = d[self.parent(v)] + self.lengths[v];
        }
        d
    }

    /// Maximum distance from the root to any point; zero for the empty tree.
    pub fn height(&self) -> f64 {
        self.depths().into_iter().fold(0.0, f64::max)
    }

    /// Sum of all edge lengths.
    pub fn total_length(&self) -> f64 {
        self.lengths[1..].iter().sum()
    }

    /// Merges every chain through a non-root vertex with one child into a
    /// single edge whose length is the sum along the chain.
    pub fn series_reduce(&self) -> MetricTree {
        let shape = &self.shape;
        if shape.is_reduced() {
            return self.clone();
        }
        let mut counts = Vec::with_capacity(self.node_count());
        let mut lengths = vec![0.0];
        let mut queue = VecDeque::from([0usize]);
        while let Some(v) = queue.pop_front() {
            counts.push(shape.degree_out(v) as u32);
            for c in shape.children(v) {
                let mut end = c;
                let mut len = self.lengths[c];
                while shape.degree_out(end) == 1 {
                    end = shape.child_start[end] as usize;
                    len += self.lengths[end];
                }
                lengths.push(len);
                queue.push_back(end);
            }
        }
        MetricTree { shape: CombinatorialTree::from_bfs_counts(&counts), lengths }
    }

    /// The subtree of all points descending from `x`, rooted at `x`.
    ///
    /// At an interior edge point the remaining part of the edge becomes the
    /// stem. At a vertex the result keeps that vertex's children, so the root
    /// may have several children; a leaf tip yields the empty tree.
    pub fn descendant_subtree(&self, x: TreePoint) -> Result<MetricTree, TreeError> {
        match self.normalize_point(x)? {
            TreePoint::Vertex(v) => Ok(self.extract(v, None)),
            TreePoint::Edge { edge, offset } => {
                Ok(self.extract(edge, Some(self.lengths[edge] - offset)))
            }
        }
    }

    /// Maps edge endpoints to vertices and validates the point.
    pub fn normalize_point(&self, x: TreePoint) -> Result<TreePoint, TreeError> {
        let n = self.node_count();
        match x {
            TreePoint::Vertex(v) if v < n => Ok(x),
            TreePoint::Vertex(v) => Err(TreeError::PointOutsideTree(format!("vertex {v}"))),
            TreePoint::Edge { edge, offset } => {
                if edge == 0 || edge >= n {
                    return Err(TreeError::PointOutsideTree(format!("edge {edge}")));
                }
                let len = self.lengths[edge];
                if !(0.0..=len).contains(&offset) {
                    return Err(TreeError::PointOutsideTree(format!(
                        "offset {offset} on edge {edge} of length {len}"
                    )));
                }
                if offset == 0.0 {
                    Ok(TreePoint::Vertex(self.parent(edge)))
                } else if offset == len {
                    Ok(TreePoint::Vertex(edge))
                } else {
                    Ok(x)
                }
            }
        }
    }

    /// Copies the descendant tree of `v`, optionally hanging it below a stem.
    fn extract(&self, v: usize, stem: Option<f64>) -> MetricTree {
        let mut counts = Vec::new();
        let mut lengths = vec![0.0];
        if let Some(s) = stem {
            counts.push(1);
            lengths.push(s);
        }
        let mut queue = VecDeque::from([v]);
        while let Some(u) = queue.pop_front() {
            counts.push(self.shape.degree_out(u) as u32);
            for c in self.children(u) {
                lengths.push(self.lengths[c]);
                queue.push_back(c);
            }
        }
        MetricTree { shape: CombinatorialTree::from_bfs_counts(&counts), lengths }
    }

    /// Permutes sibling order at every vertex according to `key`, which gets
    /// the vertex and its children and returns them in the desired order.
    pub fn reorder_children(&self, mut key: impl FnMut(usize, Vec<usize>) -> Vec<usize>) -> MetricTree {
        let n = self.node_count();
        let children: Vec<Vec<usize>> = (0..n).map(|v| key(v, self.children(v).collect())).collect();
        MetricTree::from_children(&children, &self.lengths, 0)
    }
}

impl From<&MetricTree> for CombinatorialTree {
    fn from(t: &MetricTree) -> Self {
        t.shape.clone()
    }
}

/// Drops lengths, keeping the structure.
pub fn shape(t: &MetricTree) -> CombinatorialTree {
    t.shape.clone()
}

pub fn tree_height(t: &MetricTree) -> f64 {
    t.height()
}

pub fn tree_length(t: &MetricTree) -> f64 {
    t.total_length()
}

pub fn edge_count(t: &CombinatorialTree) -> usize {
    t.edge_count()
}

pub fn leaf_count(t: &CombinatorialTree) -> usize {
    t.leaf_count()
}

/// Minimal number of Horton prunings that empty a planted tree; 0 for the
/// empty tree. For a stemless tree the root's own combination is returned.
pub fn horton_strahler_order(t: &CombinatorialTree) -> u32 {
    t.strahler_values()[0]
}

pub fn series_reduce(t: &MetricTree) -> MetricTree {
    t.series_reduce()
}

pub fn descendant_subtree(t: &MetricTree, x: TreePoint) -> Result<MetricTree, TreeError> {
    t.descendant_subtree(x)
}

pub fn canonical_code(t: &CombinatorialTree) -> Vec<u8> {
    t.canonical_code()
}

/// Canonical codes of the small planted shapes used by attractor experiments.
pub mod small_shapes {
    pub const SINGLE_EDGE: &[u8] = b"(())";
    pub const CHERRY: &[u8] = b"((()()))";
    pub const STAR_TRIPOD: &[u8] = b"((()()()))";
    pub const CATERPILLAR_TRIPOD: &[u8] = b"((()(()())))";

    pub const ALL: [(&str, &[u8]); 4] = [
        ("single_edge", SINGLE_EDGE),
        ("cherry", CHERRY),
        ("star_tripod", STAR_TRIPOD),
        ("caterpillar_tripod", CATERPILLAR_TRIPOD),
    ];
}

/// Whether two metric trees are isomorphic with matching lengths up to `tol`.
///
/// Siblings with equal shape are paired by descending subtree length, which
/// is exact whenever those lengths differ by more than the tolerance.
pub fn metric_close(a: &MetricTree, b: &MetricTree, tol: f64) -> bool {
    if a.node_count() != b.node_count() {
        return false;
    }
    let ca = canonical::codes(a.shape());
    let cb = canonical::codes(b.shape());
    if ca[0] != cb[0] {
        return false;
    }
    let la = subtree_lengths(a);
    let lb = subtree_lengths(b);
    let sorted = |t: &MetricTree, codes: &[Vec<u8>], ls: &[f64], v: usize| {
        let mut ch: Vec<usize> = t.children(v).collect();
        ch.sort_by(|&x, &y| {
            (codes[x].len(), &codes[x])
                .cmp(&(codes[y].len(), &codes[y]))
                .then((ls[y] + t.len(y)).total_cmp(&(ls[x] + t.len(x))))
        });
        ch
    };
    let mut stack = vec![(0usize, 0usize)];
    while let Some((u, v)) = stack.pop() {
        if (a.len(u) - b.len(v)).abs() > tol {
            return false;
        }
        let cu = sorted(a, &ca, &la, u);
        let cv = sorted(b, &cb, &lb, v);
        stack.extend(cu.into_iter().zip(cv));
    }
    true
}

/// Total length of the descendant tree of each vertex.
pub fn subtree_lengths(t: &MetricTree) -> Vec<f64> {
    let n = t.node_count();
    let mut s = vec![0.0; n];
    for v in (1..n).rev() {
        s[t.parent(v)] += s[v] + t.len(v);
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn cherry(stem: f64, a: f64, b: f64) -> MetricTree {
        MetricTree::new(CombinatorialTree::from_bfs_counts(&[1, 2]), vec![0.0, stem, a, b]).unwrap()
    }

    fn single(len: f64) -> MetricTree {
        MetricTree::new(CombinatorialTree::from_bfs_counts(&[1]), vec![0.0, len]).unwrap()
    }

    #[test]
    fn counts_and_geometry() {
        let e = MetricTree::empty();
        assert_eq!((e.edge_count(), e.leaf_count(), e.height(), e.total_length()), (0, 0, 0.0, 0.0));
        let s = single(2.0);
        assert_eq!((s.edge_count(), s.leaf_count(), s.height(), s.total_length()), (1, 1, 2.0, 2.0));
        let c = cherry(1.0, 1.0, 3.0);
        assert_eq!((c.edge_count(), c.leaf_count()), (3, 2));
        assert_eq!(c.height(), 4.0);
        assert_eq!(c.total_length(), 5.0);
        assert!(c.shape().is_planted() && c.shape().is_reduced());
    }

    #[test]
    fn shape_drops_lengths() {
        assert_eq!(shape(&MetricTree::empty()), CombinatorialTree::empty());
        assert_eq!(shape(&cherry(1.0, 2.0, 3.0)), shape(&cherry(5.0, 1.0, 1.0)));
        assert_eq!(shape(&single(2.5)).edge_count(), 1);
    }

    #[test]
    fn strahler_orders() {
        assert_eq!(horton_strahler_order(&CombinatorialTree::empty()), 0);
        assert_eq!(horton_strahler_order(single(1.0).shape()), 1);
        assert_eq!(horton_strahler_order(cherry(1.0, 1.0, 1.0).shape()), 2);
        // planted perfect binary tree with 3 levels of branching
        let t = CombinatorialTree::from_bfs_counts(&[1, 2, 2, 2, 2, 2, 2, 2]);
        assert_eq!(t.leaf_count(), 8);
        assert_eq!(horton_strahler_order(&t), 4);
        let t = CombinatorialTree::from_bfs_counts(&[1, 2, 2, 2]);
        assert_eq!(horton_strahler_order(&t), 3);
        // one branch deeper than the other does not raise the order
        let t = CombinatorialTree::from_bfs_counts(&[1, 2, 0, 2]);
        assert_eq!(horton_strahler_order(&t), 2);
    }

    #[test]
    fn series_reduction() {
        let chain = MetricTree::new(CombinatorialTree::from_bfs_counts(&[1, 1]), vec![0.0, 1.0, 2.0]).unwrap();
        let r = chain.series_reduce();
        assert_eq!(r, single(3.0));
        let c = cherry(1.0, 1.0, 3.0);
        assert_eq!(c.series_reduce(), c);
        assert_eq!(MetricTree::empty().series_reduce(), MetricTree::empty());
        let r2 = r.series_reduce();
        assert_eq!(r, r2);
    }

    #[test]
    fn descendant_subtrees() {
        let c = cherry(1.0, 1.0, 3.0);
        assert_eq!(c.descendant_subtree(TreePoint::Vertex(0)).unwrap(), c);
        assert!(c.descendant_subtree(TreePoint::Vertex(3)).unwrap().is_empty());
        let d = c.descendant_subtree(TreePoint::Edge { edge: 3, offset: 1.0 }).unwrap();
        assert_eq!(d, single(2.0));
        let at_branch = c.descendant_subtree(TreePoint::Vertex(1)).unwrap();
        assert_eq!(at_branch.shape().degree_out(0), 2);
        assert_eq!(at_branch.total_length(), 4.0);
        assert!(c.descendant_subtree(TreePoint::Edge { edge: 3, offset: 4.0 }).is_err());
        assert!(c.descendant_subtree(TreePoint::Vertex(9)).is_err());
    }

    #[test]
    fn canonical_codes() {
        let a = MetricTree::new(CombinatorialTree::from_bfs_counts(&[1, 2, 0, 2]), vec![0.0, 1.0, 1.0, 1.0, 1.0, 1.0]).unwrap();
        let b = MetricTree::new(CombinatorialTree::from_bfs_counts(&[1, 2, 2, 0]), vec![0.0, 1.0, 1.0, 1.0, 1.0, 1.0]).unwrap();
        assert_eq!(a.shape().canonical_code(), b.shape().canonical_code());
        assert_eq!(a.shape().canonical_code(), small_shapes::CATERPILLAR_TRIPOD);
        assert_eq!(single(1.0).shape().canonical_code(), small_shapes::SINGLE_EDGE);
        assert_eq!(cherry(1.0, 1.0, 1.0).shape().canonical_code(), small_shapes::CHERRY);
        assert_ne!(single(1.0).shape().canonical_code(), cherry(1.0, 1.0, 1.0).shape().canonical_code());
    }

    #[test]
    fn metric_closeness() {
        let a = cherry(1.0, 1.0, 3.0);
        let b = cherry(1.0, 3.0, 1.0 + 1e-12);
        assert!(metric_close(&a, &b, 1e-9));
        assert!(!metric_close(&a, &cherry(1.0, 3.0, 1.1), 1e-9));
        assert!(!metric_close(&a, &single(5.0), 1e-9));
    }
}
