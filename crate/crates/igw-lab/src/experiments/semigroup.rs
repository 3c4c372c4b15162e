use std::fs;

use super::{sample_batch, ExperimentError, ExperimentReport, ExperimentSpec};
use crate::pruning::{semigroup_check, PhiFunctional, SemigroupOutcome};
use crate::stats::{Expect, GofReport};
use crate::tree::{to_newick, MetricTree};

/// Height and Horton order compose as semigroups on random trees; total
/// length does not, and the first counterexample found is written to
/// `spec.output` as a Newick line.
///
/// `spec.thresholds` = [s, t] for height and length (default 0.3, 0.3 and
/// 1, 1); Horton order uses the integer pairs (1,1), (1,2), (2,1), (2,2).
pub fn run_semigroup(spec: &ExperimentSpec) -> Result<ExperimentReport, ExperimentError> {
    let d = spec.distribution()?;
    let cfg = spec.sample_config(spec.seed, true);
    let mut trees: Vec<MetricTree> = Vec::new();
    let mut offset = 0;
    while (trees.len() as u64) < spec.replicates && offset < spec.max_trees {
        let n = spec.replicates - trees.len() as u64;
        let batch = sample_batch(&d, &cfg, offset, n, |_, o| (!o.censored).then_some(o.tree));
        offset += n;
        trees.extend(batch.into_iter().flatten());
    }
    let (s, t) = match spec.thresholds.as_slice() {
        [s, t, ..] => (*s, *t),
        _ => (0.3, 0.3),
    };
    let mut report = ExperimentReport::new(spec);
    let count_failures = |phi: PhiFunctional, pairs: &[(f64, f64)]| -> Result<usize, ExperimentError> {
        let mut bad = 0;
        for tree in &trees {
            for &(a, b) in pairs {
                if semigroup_check(tree, &phi, a, b)? != SemigroupOutcome::Equal {
                    bad += 1;
                }
            }
        }
        Ok(bad)
    };
    let h = count_failures(PhiFunctional::Height, &[(s, t)])?;
    report.checks.push(GofReport::new("height_semigroup", h as f64, trees.len(), 0.0, Expect::AtMost).with("s", s).with("t", t));
    let ord_pairs = [(1.0, 1.0), (1.0, 2.0), (2.0, 1.0), (2.0, 2.0)];
    let o = count_failures(PhiFunctional::Ord, &ord_pairs)?;
    report.checks.push(GofReport::new("ord_semigroup", o as f64, trees.len() * ord_pairs.len(), 0.0, Expect::AtMost));
    let (ls, lt) = match spec.thresholds.as_slice() {
        [_, _, a, b, ..] => (*a, *b),
        _ => (1.0, 1.0),
    };
    let mut found = 0;
    let mut first: Option<String> = None;
    for tree in &trees {
        if let SemigroupOutcome::Counterexample { composed, direct } =
            semigroup_check(tree, &PhiFunctional::Length, ls, lt)?
        {
            found += 1;
            if first.is_none() {
                first = Some(to_newick(tree));
                report.notes.push(format!(
                    "length counterexample at s = {ls}, t = {lt}: {} gives {} composed but {} direct",
                    to_newick(tree),
                    to_newick(&composed),
                    to_newick(&direct)
                ));
            }
        }
    }
    if let (Some(path), Some(nwk)) = (&spec.output, &first) {
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir)?;
        }
        fs::write(path, format!("{nwk}\n"))?;
    }
    report.checks.push(
        GofReport::new("length_counterexample", found as f64, trees.len(), 0.0, Expect::Above)
            .with("s", ls)
            .with("t", lt),
    );
    Ok(report)
}
