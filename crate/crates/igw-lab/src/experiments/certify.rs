//! Pruning decisions on possibly censored samples.
//!
//! On a partial tree, vertex values computed with unexpanded vertices taken
//! as leaves are lower bounds. A decision "φ ≥ t" is certain when the lower
//! bound already reaches t or the subtree is complete; "φ < t" is certain
//! only on complete subtrees. Trees whose answer depends on an uncertain
//! decision are reported as such and left out of the statistics.

use serde::{Deserialize, Serialize};

use crate::pruning::{prune_with_values, EdgeLaw, Phi};
use crate::sampler::SampleOutcome;
use crate::tree::{small_shapes, CombinatorialTree, MetricTree};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Certified<T> {
    Known(T),
    Uncertain,
}

/// What pruning does to the edge above a vertex.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EdgeCall {
    Dropped,
    /// Kept for this length from its upper end; the lower vertex is not.
    Leaf(f64),
    /// Kept whole, and the lower vertex is kept.
    Descend(f64),
    Uncertain,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FirstVertex {
    /// Children of the first vertex of the reduced result; 0 for a single edge.
    pub offspring: usize,
    /// Length of the stem after series reduction.
    pub stem: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Walk {
    Extinct,
    Uncertain,
    Vertex(FirstVertex),
}

/// Follows the stem of the pruned tree from the root down to its first
/// vertex, merging vertices left with a single child.
pub fn first_vertex(t: &MetricTree, call: impl Fn(usize) -> EdgeCall) -> Walk {
    if t.node_count() < 2 {
        return Walk::Extinct;
    }
    let mut c = 1;
    let mut stem = 0.0;
    let mut first = true;
    loop {
        match call(c) {
            EdgeCall::Uncertain => return Walk::Uncertain,
            EdgeCall::Dropped => {
                debug_assert!(first, "walk only follows kept edges");
                return Walk::Extinct;
            }
            EdgeCall::Leaf(l) => {
                return Walk::Vertex(FirstVertex { offspring: 0, stem: stem + l });
            }
            EdgeCall::Descend(l) => {
                stem += l;
                let mut kept = Vec::new();
                for d in t.children(c) {
                    match call(d) {
                        EdgeCall::Uncertain => return Walk::Uncertain,
                        EdgeCall::Dropped => {}
                        _ => kept.push(d),
                    }
                }
                match kept.len() {
                    0 => return Walk::Vertex(FirstVertex { offspring: 0, stem }),
                    1 => c = kept[0],
                    k => return Walk::Vertex(FirstVertex { offspring: k, stem }),
                }
            }
        }
        first = false;
    }
}

/// Shapes whose limiting probabilities the attractor experiments track.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SmallShape {
    SingleEdge,
    Cherry,
    StarTripod,
    CaterpillarTripod,
    Other,
}

impl SmallShape {
    pub const TRACKED: [SmallShape; 4] =
        [Self::SingleEdge, Self::Cherry, Self::StarTripod, Self::CaterpillarTripod];

    pub fn of(t: &CombinatorialTree) -> Self {
        let code = t.canonical_code();
        match code.as_slice() {
            c if c == small_shapes::SINGLE_EDGE => Self::SingleEdge,
            c if c == small_shapes::CHERRY => Self::Cherry,
            c if c == small_shapes::STAR_TRIPOD => Self::StarTripod,
            c if c == small_shapes::CATERPILLAR_TRIPOD => Self::CaterpillarTripod,
            _ => Self::Other,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::SingleEdge => "single_edge",
            Self::Cherry => "cherry",
            Self::StarTripod => "star_tripod",
            Self::CaterpillarTripod => "caterpillar_tripod",
            Self::Other => "other",
        }
    }
}

/// φ = 1 when the descendant tree holds a selected leaf, else 0.
pub struct SelectedLeaves<'a> {
    pub selected: &'a [bool],
}

impl Phi for SelectedLeaves<'_> {
    fn name(&self) -> String {
        "selected".into()
    }

    fn law(&self) -> EdgeLaw {
        EdgeLaw::Constant
    }

    fn vertex_values(&self, t: &MetricTree) -> Vec<f64> {
        let mut val: Vec<f64> = (0..t.node_count()).map(|v| if self.selected[v] { 1.0 } else { 0.0 }).collect();
        for v in (1..t.node_count()).rev() {
            let p = t.parent(v);
            val[p] = val[p].max(val[v]);
        }
        val
    }

    fn planted_value(&self, _stem: f64, below: f64) -> f64 {
        below
    }
}

/// A sampled tree prepared for pruning at one or more thresholds.
pub struct PruneView<'a> {
    pub tree: &'a MetricTree,
    pub law: EdgeLaw,
    phi: &'a dyn Phi,
    /// Vertex values; lower bounds where the subtree is incomplete.
    pub values: Vec<f64>,
    pub complete: Vec<bool>,
}

impl<'a> PruneView<'a> {
    pub fn new(outcome: &'a SampleOutcome, phi: &'a dyn Phi) -> Self {
        let complete = if outcome.censored { outcome.complete_subtrees() } else { vec![true; outcome.tree.node_count()] };
        Self::with_values(&outcome.tree, phi, phi.vertex_values(&outcome.tree), complete)
    }

    pub fn with_values(tree: &'a MetricTree, phi: &'a dyn Phi, values: Vec<f64>, complete: Vec<bool>) -> Self {
        Self { tree, law: phi.law(), phi, values, complete }
    }

    /// φ of the whole planted tree (a lower bound when censored).
    pub fn root_value(&self) -> f64 {
        self.values[0]
    }

    pub fn is_complete(&self) -> bool {
        self.complete[0]
    }

    pub fn call(&self, c: usize, t: f64) -> EdgeCall {
        let len = self.tree.len(c);
        let v = self.values[c];
        if v >= t {
            return EdgeCall::Descend(len);
        }
        if !self.complete[c] {
            return EdgeCall::Uncertain;
        }
        if self.phi.planted_value(len, v) < t {
            return EdgeCall::Dropped;
        }
        match self.law {
            // the point at offset o has value planted(len - o, v)
            EdgeLaw::Additive => EdgeCall::Leaf((self.phi.planted_value(len, v) - t).min(len)),
            EdgeLaw::Constant => EdgeCall::Leaf(len),
        }
    }

    pub fn survives(&self, t: f64) -> Certified<bool> {
        if self.tree.node_count() < 2 {
            return Certified::Known(false);
        }
        match self.call(1, t) {
            EdgeCall::Uncertain => Certified::Uncertain,
            EdgeCall::Dropped => Certified::Known(false),
            _ => Certified::Known(true),
        }
    }

    pub fn first_vertex(&self, t: f64) -> Walk {
        first_vertex(self.tree, |c| self.call(c, t))
    }

    /// Shape class of the pruned tree; `None` when it is empty.
    ///
    /// When some decision is uncertain, the lower-bound pruning is a subtree
    /// of the true result, so four or more leaves still certify `Other`.
    pub fn small_shape(&self, t: f64) -> Certified<Option<SmallShape>> {
        match self.survives(t) {
            Certified::Uncertain => return Certified::Uncertain,
            Certified::Known(false) => return Certified::Known(None),
            Certified::Known(true) => {}
        }
        let mut certain = true;
        let mut stack = vec![1usize];
        'walk: while let Some(c) = stack.pop() {
            match self.call(c, t) {
                EdgeCall::Uncertain => {
                    certain = false;
                    break 'walk;
                }
                EdgeCall::Descend(_) => stack.extend(self.tree.children(c)),
                _ => {}
            }
        }
        let pruned = self.prune_lower(t);
        if certain {
            Certified::Known(Some(SmallShape::of(pruned.shape())))
        } else if pruned.leaf_count() >= 4 {
            Certified::Known(Some(SmallShape::Other))
        } else {
            Certified::Uncertain
        }
    }

    /// Pruning computed from the (lower-bound) values.
    pub fn prune_lower(&self, t: f64) -> MetricTree {
        prune_with_values(self.tree, self.phi, &self.values, t).tree
    }
}
