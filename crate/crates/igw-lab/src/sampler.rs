//! Seeded breadth-first sampling of Galton-Watson trees with a node budget.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::offspring::OffspringDistribution;
use crate::tree::{CombinatorialTree, MetricTree};

pub const DEFAULT_BUDGET: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleConfig {
    pub seed: u64,
    pub replicate: u64,
    /// Maximum number of vertices, root included.
    pub budget: usize,
    /// Edge rate; `None` samples shapes with unit lengths.
    pub lambda: Option<f64>,
}

impl SampleConfig {
    pub fn new(seed: u64, budget: usize, lambda: Option<f64>) -> Self {
        assert!(budget >= 1, "node budget must be at least 1");
        if let Some(l) = lambda {
            assert!(l > 0.0 && l.is_finite(), "edge rate must be positive");
        }
        Self { seed, replicate: 0, budget, lambda }
    }

    pub fn replicate(self, replicate: u64) -> Self {
        Self { replicate, ..self }
    }

    /// The generator for this (seed, replicate) pair. Replicates use
    /// distinct ChaCha streams of the same key.
    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.replicate);
        rng
    }
}

/// One sampled tree. When censored, `tree` is the partial tree generated so
/// far: vertices with index `>= expanded` have not drawn their offspring yet
/// and appear as leaves.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleOutcome {
    pub tree: MetricTree,
    pub censored: bool,
    pub expanded: usize,
    pub nodes: usize,
    /// Uniform variates consumed.
    pub draws: u64,
}

impl SampleOutcome {
    pub fn complete(&self) -> Option<&MetricTree> {
        (!self.censored).then_some(&self.tree)
    }

    /// Whether vertex `v`'s children are known.
    pub fn is_expanded(&self, v: usize) -> bool {
        v < self.expanded
    }

    /// For each vertex, whether its descendant tree is fully generated.
    pub fn complete_subtrees(&self) -> Vec<bool> {
        let n = self.tree.node_count();
        let mut ok: Vec<bool> = (0..n).map(|v| v < self.expanded).collect();
        for v in (1..n).rev() {
            if !ok[v] {
                ok[self.tree.parent(v)] = false;
            }
        }
        ok
    }
}

/// One offspring count by inversion of the tail function.
pub fn sample_offspring<R: Rng + ?Sized>(d: &OffspringDistribution, rng: &mut R) -> u64 {
    let v = 1.0 - rng.gen::<f64>();
    d.inverse_tail(v, u64::MAX).expect("uncapped draw")
}

/// Planted tree shape with unit edge lengths.
pub fn sample_shape(d: &OffspringDistribution, cfg: &SampleConfig) -> SampleOutcome {
    sample(d, &SampleConfig { lambda: None, ..*cfg })
}

/// Planted tree with independent Exp(λ) edge lengths.
pub fn sample_metric(d: &OffspringDistribution, cfg: &SampleConfig) -> SampleOutcome {
    assert!(cfg.lambda.is_some(), "sample_metric needs an edge rate");
    sample(d, cfg)
}

/// Shape by breadth-first generation, then lengths edge by edge.
pub fn sample(d: &OffspringDistribution, cfg: &SampleConfig) -> SampleOutcome {
    let mut rng = cfg.rng();
    let mut draws = 0u64;
    let mut counts: Vec<u32> = vec![1];
    let mut nodes = 2usize.min(cfg.budget);
    let mut censored = cfg.budget < 2;
    let mut expanded = if censored { 0 } else { 1 };
    if !censored {
        while expanded < nodes {
            let remaining = (cfg.budget - nodes) as u64;
            let v = 1.0 - rng.gen::<f64>();
            draws += 1;
            match d.inverse_tail(v, remaining) {
                Some(k) => {
                    counts.push(k as u32);
                    nodes += k as usize;
                    expanded += 1;
                }
                None => {
                    censored = true;
                    break;
                }
            }
        }
    }
    let shape = CombinatorialTree::from_bfs_counts(&counts[..expanded]);
    let tree = match cfg.lambda {
        None => shape.with_unit_lengths(),
        Some(lambda) => {
            let exp = Exp::new(lambda).expect("positive rate");
            let n = shape.node_count();
            let mut lengths = Vec::with_capacity(n);
            lengths.push(0.0);
            for _ in 1..n {
                let mut x: f64 = exp.sample(&mut rng);
                draws += 1;
                while x <= 0.0 {
                    x = exp.sample(&mut rng);
                    draws += 1;
                }
                lengths.push(x);
            }
            MetricTree::new(shape, lengths).expect("positive lengths")
        }
    };
    SampleOutcome { nodes: tree.node_count(), tree, censored, expanded, draws }
}

/// Applies `f` to replicates `0..n` in parallel, in replicate order.
pub fn map_replicates<T: Send>(
    d: &OffspringDistribution,
    cfg: &SampleConfig,
    n: u64,
    f: impl Fn(SampleOutcome) -> T + Sync + Send,
) -> Vec<T> {
    (0..n).into_par_iter().map(|r| f(sample(d, &cfg.replicate(r)))).collect()
}
