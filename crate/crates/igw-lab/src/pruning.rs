//! Generalized dynamical pruning, Horton pruning, hereditary reductions and
//! Bernoulli leaf coloring on finite metric trees.
//!
//! All operators share one traversal: starting at the root, each child edge
//! is kept whole, cut at an interior point, or dropped, and the result is
//! series-reduced. A point at offset `o` on the edge above `c` has descendant
//! tree "stem of length `len(c) - o` above Δ_c", so for functionals that grow
//! by distance along an edge the cut point is found by bisection over the
//! floating-point offsets, which makes the comparison `φ ≥ t` exact in
//! floating point.

use std::collections::VecDeque;
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tree::{metric_close, CombinatorialTree, MetricTree, TreePoint};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PruneError {
    #[error("threshold must be nonnegative, got {0}")]
    NegativeThreshold(f64),
    /// The predicate holds at a point but fails above it.
    #[error("predicate is not hereditary at {point:?}: {detail}")]
    NonHereditary { point: TreePoint, detail: String },
}

/// How φ(Δ_x) behaves as x moves up an edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EdgeLaw {
    /// φ grows by the distance travelled.
    Additive,
    /// φ is the same at every interior point.
    Constant,
}

/// A functional monotone under isometric embedding.
pub trait Phi: Sync {
    fn name(&self) -> String;
    fn law(&self) -> EdgeLaw;
    /// φ(Δ_v) for every vertex v, Δ_v being the stemless descendant tree.
    fn vertex_values(&self, t: &MetricTree) -> Vec<f64>;
    /// φ of the planted tree made of a stem of length `stem` above a vertex
    /// whose descendant tree has value `below`.
    fn planted_value(&self, stem: f64, below: f64) -> f64;

    fn value(&self, t: &MetricTree) -> f64 {
        self.vertex_values(t)[0]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PhiFunctional {
    Height,
    Length,
    Leaves,
    /// Horton-Strahler order minus one.
    Ord,
}

impl PhiFunctional {
    pub const ALL: [PhiFunctional; 4] = [Self::Height, Self::Length, Self::Leaves, Self::Ord];

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "height" => Some(Self::Height),
            "length" => Some(Self::Length),
            "leaves" => Some(Self::Leaves),
            "ord" | "horton" => Some(Self::Ord),
            _ => None,
        }
    }
}

impl fmt::Display for PhiFunctional {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Height => "height",
            Self::Length => "length",
            Self::Leaves => "leaves",
            Self::Ord => "ord",
        })
    }
}

impl Phi for PhiFunctional {
    fn name(&self) -> String {
        self.to_string()
    }

    fn law(&self) -> EdgeLaw {
        match self {
            Self::Height | Self::Length => EdgeLaw::Additive,
            Self::Leaves | Self::Ord => EdgeLaw::Constant,
        }
    }

    fn vertex_values(&self, t: &MetricTree) -> Vec<f64> {
        let n = t.node_count();
        match self {
            Self::Height | Self::Length | Self::Leaves => {
                let mut val = vec![0.0; n];
                for v in (0..n).rev() {
                    let mut acc = 0.0;
                    for c in t.children(v) {
                        let x = self.planted_value(t.len(c), val[c]);
                        acc = if *self == Self::Height { f64::max(acc, x) } else { acc + x };
                    }
                    val[v] = acc;
                }
                val
            }
            Self::Ord => t.shape().strahler_values().into_iter().map(|s| s.saturating_sub(1) as f64).collect(),
        }
    }

    fn planted_value(&self, stem: f64, below: f64) -> f64 {
        match self {
            Self::Height | Self::Length => stem + below,
            Self::Leaves => below.max(1.0),
            Self::Ord => below,
        }
    }
}

/// Output of a pruning or reduction.
#[derive(Debug, Clone, PartialEq)]
pub struct PrunedResult {
    pub tree: MetricTree,
    pub survived: bool,
    /// (edge of the input tree, offset from its parent end) of interior cuts.
    pub cuts: Vec<(usize, f64)>,
}

impl Default for PrunedResult {
    fn default() -> Self {
        Self { tree: MetricTree::empty(), survived: false, cuts: Vec::new() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Fate {
    Full,
    /// Keep the part of the edge within this offset of the parent.
    Partial(f64),
    Dropped,
}

fn prev_float(x: f64) -> f64 {
    f64::from_bits(x.to_bits() - 1)
}

/// Fate of an edge of length `len` given `holds(o)`, which tells whether the
/// point at offset `o` is kept and must be nonincreasing in `o`.
fn solve_edge<E>(len: f64, mut holds: impl FnMut(f64) -> Result<bool, E>) -> Result<Fate, E> {
    let top = len.to_bits();
    if top <= 1 {
        return Ok(if holds(len)? { Fate::Full } else { Fate::Dropped });
    }
    if holds(prev_float(len))? {
        return Ok(Fate::Full);
    }
    if !holds(f64::from_bits(1))? {
        return Ok(Fate::Dropped);
    }
    let (mut lo, mut hi) = (1u64, top - 1);
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if holds(f64::from_bits(mid))? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(Fate::Partial(f64::from_bits(lo)))
}

/// Shared traversal: keeps the root, applies `fate` to child edges of kept
/// vertices and descends into a fully kept edge's lower vertex when
/// `keep_vertex` says so.
fn restrict<E>(
    t: &MetricTree,
    mut fate: impl FnMut(usize) -> Result<Fate, E>,
    mut keep_vertex: impl FnMut(usize) -> Result<bool, E>,
) -> Result<PrunedResult, E> {
    let mut children: Vec<Vec<usize>> = vec![Vec::new()];
    let mut lengths = vec![0.0];
    let mut cuts = Vec::new();
    let mut queue = VecDeque::from([(0usize, 0usize)]);
    while let Some((v, id)) = queue.pop_front() {
        for c in t.children(v) {
            let (len, full) = match fate(c)? {
                Fate::Dropped => continue,
                Fate::Partial(o) => {
                    cuts.push((c, o));
                    (o, false)
                }
                Fate::Full => (t.len(c), true),
            };
            let new = children.len();
            children.push(Vec::new());
            lengths.push(len);
            children[id].push(new);
            if full && keep_vertex(c)? {
                queue.push_back((c, new));
            }
        }
    }
    if children[0].is_empty() {
        return Ok(PrunedResult { cuts, ..Default::default() });
    }
    let tree = MetricTree::from_children(&children, &lengths, 0).series_reduce();
    Ok(PrunedResult { tree, survived: true, cuts })
}

/// 𝒮_t(φ, T): the root together with every point whose descendant tree has
/// φ-value at least `threshold`.
pub fn gdp_prune(t: &MetricTree, phi: &dyn Phi, threshold: f64) -> Result<PrunedResult, PruneError> {
    if !(threshold >= 0.0) {
        return Err(PruneError::NegativeThreshold(threshold));
    }
    let val = phi.vertex_values(t);
    Ok(prune_with_values(t, phi, &val, threshold))
}

/// [`gdp_prune`] with precomputed vertex values.
pub fn prune_with_values(t: &MetricTree, phi: &dyn Phi, val: &[f64], threshold: f64) -> PrunedResult {
    let law = phi.law();
    let r: Result<_, std::convert::Infallible> = restrict(
        t,
        |c| {
            let len = t.len(c);
            match law {
                EdgeLaw::Additive => solve_edge(len, |o| Ok(phi.planted_value(len - o, val[c]) >= threshold)),
                EdgeLaw::Constant => {
                    Ok(if phi.planted_value(len, val[c]) >= threshold { Fate::Full } else { Fate::Dropped })
                }
            }
        },
        |c| Ok(val[c] >= threshold),
    );
    match r {
        Ok(x) => x,
        Err(e) => match e {},
    }
}

/// Horton pruning ℛ: remove leaves, then series-reduce.
pub fn horton_prune(t: &MetricTree) -> MetricTree {
    prune_with_values(t, &PhiFunctional::Ord, &PhiFunctional::Ord.vertex_values(t), 1.0).tree
}

pub fn horton_prune_shape(t: &CombinatorialTree) -> CombinatorialTree {
    horton_prune(&t.with_unit_lengths()).into_shape()
}

/// R_A(T) = {ρ} ∪ {x : keep(Δ_x)} for a hereditary property A.
///
/// Checks along the way that no kept point lies below a rejected one, and
/// that children of rejected vertices are rejected at their top.
pub fn hereditary_reduce(
    t: &MetricTree,
    keep: impl Fn(&MetricTree) -> bool,
) -> Result<PrunedResult, PruneError> {
    let at = |x: TreePoint| keep(&t.descendant_subtree(x).expect("point on tree"));
    let violation = |point: TreePoint, detail: &str| PruneError::NonHereditary { point, detail: detail.into() };
    let check_below = |c: usize| -> Result<(), PruneError> {
        for g in t.children(c) {
            let x = TreePoint::Edge { edge: g, offset: f64::from_bits(1).min(t.len(g)) };
            if at(x) {
                return Err(violation(x, "kept below a rejected vertex"));
            }
        }
        Ok(())
    };
    restrict(
        t,
        |c| {
            let len = t.len(c);
            let fate = solve_edge(len, |o| Ok::<_, PruneError>(at(TreePoint::Edge { edge: c, offset: o.min(len) })))?;
            if fate != Fate::Full {
                if at(TreePoint::Vertex(c)) {
                    return Err(violation(TreePoint::Vertex(c), "vertex kept while the edge above is not"));
                }
                check_below(c)?;
            }
            Ok(fate)
        },
        |c| {
            let k = at(TreePoint::Vertex(c));
            if !k {
                check_below(c)?;
            }
            Ok(k)
        },
    )
}

/// Randomized heredity check: draws pairs x above y on random trees and
/// reports the first pair with keep(Δ_y) but not keep(Δ_x).
pub fn find_hereditary_violation<R: Rng + ?Sized>(
    trees: &[MetricTree],
    keep: impl Fn(&MetricTree) -> bool,
    pairs_per_tree: usize,
    rng: &mut R,
) -> Option<(usize, TreePoint, TreePoint)> {
    for (i, t) in trees.iter().enumerate() {
        if t.is_empty() {
            continue;
        }
        for _ in 0..pairs_per_tree {
            let e = rng.gen_range(1..t.node_count());
            let oy = rng.gen::<f64>() * t.len(e);
            let y = TreePoint::Edge { edge: e, offset: oy };
            // an ancestor point: higher on the same edge or on an ancestor edge
            let mut a = e;
            let steps = rng.gen_range(0..4);
            for _ in 0..steps {
                if t.parent(a) != 0 {
                    a = t.parent(a);
                }
            }
            let ox = if a == e { rng.gen::<f64>() * oy } else { rng.gen::<f64>() * t.len(a) };
            let x = TreePoint::Edge { edge: a, offset: ox };
            let (Ok(dx), Ok(dy)) = (t.descendant_subtree(x), t.descendant_subtree(y)) else { continue };
            if keep(&dy) && !keep(&dx) {
                return Some((i, x, y));
            }
        }
    }
    None
}

/// 𝒞_p(T): leaves are selected independently with probability 1-p (in
/// vertex index order, a leaf is selected when its uniform draw is at least
/// p), and the result is the minimal subtree spanning the root and the
/// selected leaves.
pub fn bernoulli_color<R: Rng + ?Sized>(t: &MetricTree, p: f64, rng: &mut R) -> PrunedResult {
    assert!((0.0..1.0).contains(&p), "p must lie in [0, 1)");
    let n = t.node_count();
    let mut marked = vec![false; n];
    for v in 1..n {
        if t.shape().is_leaf(v) && rng.gen::<f64>() >= p {
            marked[v] = true;
        }
    }
    color_marked(t, marked)
}

/// Minimal subtree spanning the root and the marked vertices.
pub fn color_marked(t: &MetricTree, mut marked: Vec<bool>) -> PrunedResult {
    for v in (1..t.node_count()).rev() {
        if marked[v] {
            marked[t.parent(v)] = true;
        }
    }
    let r: Result<_, std::convert::Infallible> =
        restrict(t, |c| Ok(if marked[c] { Fate::Full } else { Fate::Dropped }), |c| Ok(marked[c]));
    match r {
        Ok(x) => x,
        Err(e) => match e {},
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SemigroupOutcome {
    Equal,
    Counterexample { composed: MetricTree, direct: MetricTree },
}

/// Compares 𝒮_{t2}(𝒮_s(T)) with 𝒮_{s+t2}(T) up to 1e-9 in lengths.
pub fn semigroup_check(t: &MetricTree, phi: &dyn Phi, s: f64, t2: f64) -> Result<SemigroupOutcome, PruneError> {
    let composed = gdp_prune(&gdp_prune(t, phi, s)?.tree, phi, t2)?.tree;
    let direct = gdp_prune(t, phi, s + t2)?.tree;
    Ok(if metric_close(&composed, &direct, 1e-9) {
        SemigroupOutcome::Equal
    } else {
        SemigroupOutcome::Counterexample { composed, direct }
    })
}
