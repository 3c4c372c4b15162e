use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::certify::{Certified, PruneView, SelectedLeaves, Walk};
use super::{collect_until, majority_report, ExperimentError, ExperimentReport, ExperimentSpec, Table};
use crate::analytics::{coloring_offspring, coloring_survival, ColoringVariant};
use crate::offspring::{Criticality, OffspringDistribution};
use crate::pruning::Phi;
use crate::sampler::SampleOutcome;
use crate::stats::{chi_square_pmf, Expect, GofReport, Verdict};

/// Key mixed into the seed of the leaf-selection generator.
const SELECTION_KEY: u64 = 0x00c0_10e5_1eaf_5eed;
const M_MAX: usize = 60;
/// Allowed distance of g₀ at the largest p from the attractor's q₀.
const ATTRACTOR_TOL: f64 = 0.05;

/// Leaf selection for replicate `replicate`: expanded leaves, in index order,
/// are selected when their uniform draw is at least p.
pub fn select_leaves(o: &SampleOutcome, p: f64, seed: u64, replicate: u64) -> Vec<bool> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ SELECTION_KEY);
    rng.set_stream(replicate);
    let shape = o.tree.shape();
    (0..o.tree.node_count())
        .map(|v| v > 0 && o.is_expanded(v) && shape.is_leaf(v) && rng.gen::<f64>() >= p)
        .collect()
}

enum Obs {
    Extinct,
    Uncertain,
    Offspring(usize),
}

/// Bernoulli leaf coloring: survival against the fixed-point oracle, the
/// colored offspring law against both readings of its generating function,
/// IGW invariance, and the g₀ drift as p → 1. Verdicts are majorities over
/// `spec.repeats` seeds; g₀ at the largest p is their mean.
pub fn run_coloring(spec: &ExperimentSpec) -> Result<ExperimentReport, ExperimentError> {
    let d = spec.distribution()?;
    if d.classify() != Criticality::Critical {
        return Err(ExperimentError::Spec("coloring experiments need a critical law".into()));
    }
    let grid = if spec.p_grid.is_empty() { vec![0.5] } else { spec.p_grid.clone() };
    let mut report = ExperimentReport::new(spec);
    let mut table = Table::new(
        "coloring",
        &["p", "survival", "survival_oracle", "survivors", "uncertain", "g0_hat", "g0_thinned", "as_printed_sum"],
    );
    let mut last_g0 = f64::NAN;
    for &p in &grid {
        let mut surv_runs = Vec::new();
        let mut adj_runs = Vec::new();
        let mut inv_runs = Vec::new();
        let mut g0s = Vec::new();
        for seed in spec.seeds() {
            let run = coloring_run(spec, &d, p, seed)?;
            if surv_runs.is_empty() {
                table.push(run.row.clone());
            }
            g0s.push(run.row[5]);
            surv_runs.push(run.survival);
            adj_runs.push(run.adjudication);
            inv_runs.extend(run.invariance);
        }
        report.checks.push(majority_report(surv_runs));
        report.checks.push(majority_report(adj_runs));
        if !inv_runs.is_empty() {
            report.checks.push(majority_report(inv_runs));
        }
        last_g0 = g0s.iter().sum::<f64>() / g0s.len() as f64;
    }
    if d.igw_q().is_none() {
        let q = d.estimate_l()?.attractor_q();
        report.checks.push(
            GofReport::new("attractor_g0", (last_g0 - q).abs(), 0, ATTRACTOR_TOL, Expect::AtMost)
                .with("p", *grid.last().unwrap())
                .with("target", q),
        );
    }
    report.tables.push(table);
    Ok(report)
}

struct ColoringRun {
    survival: GofReport,
    adjudication: GofReport,
    invariance: Option<GofReport>,
    row: Vec<f64>,
}

fn coloring_run(spec: &ExperimentSpec, d: &OffspringDistribution, p: f64, seed: u64) -> Result<ColoringRun, ExperimentError> {
    let (obs, drawn) = colored_first_vertices(spec, d, p, seed)?;
    let uncertain = obs.iter().filter(|o| matches!(o, Obs::Uncertain)).count() as u64;
    let mut hist: Vec<u64> = Vec::new();
    for o in &obs {
        if let Obs::Offspring(k) = o {
            if hist.len() <= *k {
                hist.resize(k + 1, 0);
            }
            hist[*k] += 1;
        }
    }
    let survivors: u64 = hist.iter().sum();
    let certain = drawn - uncertain;
    let surv = survivors as f64 / certain as f64;
    let oracle = coloring_survival(d, p)?;
    let survival = GofReport::new(
        format!("survival_p{p}"),
        (surv - oracle).abs(),
        certain as usize,
        spec.tolerance.unwrap_or(0.01),
        Expect::AtMost,
    )
    .with("estimate", surv)
    .with("oracle", oracle);
    let thinned = coloring_offspring(d, p, ColoringVariant::Thinned, M_MAX)?;
    let printed = coloring_offspring(d, p, ColoringVariant::AsPrinted, M_MAX)?;
    let thin_chi = chi_square_pmf(&hist, &thinned.g, 0)?;
    let printed_sum: f64 = printed.g.iter().sum::<f64>();
    let printed_valid = printed.g.iter().all(|&x| x >= 0.0) && printed.tail_mass >= -1e-9;
    let printed_rejected = if printed_valid {
        let mut g = printed.g.clone();
        let s: f64 = g.iter().sum();
        if s > 1.0 {
            g.iter_mut().for_each(|x| *x /= s);
        }
        chi_square_pmf(&hist, &g, 0)?.rejects(spec.alpha)
    } else {
        true
    };
    let mut adjudication = thin_chi
        .report(format!("adjudication_p{p}"), spec.alpha, Expect::AtMost)
        .with("thinned_p_value", thin_chi.p_value)
        .with("as_printed_is_probability_law", printed_valid)
        .with("as_printed_coefficient_sum", printed_sum)
        .with("as_printed_rejected", printed_rejected);
    adjudication.verdict = Verdict::from_bool(!thin_chi.rejects(spec.alpha) && printed_rejected);
    let invariance = match d.igw_q() {
        Some(_) => Some(chi_square_pmf(&hist, &d.pmf_vec(200), 0)?.report(
            format!("igw_invariance_p{p}"),
            spec.alpha,
            Expect::AtMost,
        )),
        None => None,
    };
    let g0_hat = hist.first().copied().unwrap_or(0) as f64 / survivors.max(1) as f64;
    Ok(ColoringRun {
        survival,
        adjudication,
        invariance,
        row: vec![p, surv, oracle, survivors as f64, uncertain as f64, g0_hat, thinned.g0(), printed_sum],
    })
}

fn colored_first_vertices(
    spec: &ExperimentSpec,
    d: &OffspringDistribution,
    p: f64,
    seed: u64,
) -> Result<(Vec<Obs>, u64), ExperimentError> {
    let cfg = spec.sample_config(seed, false);
    let (obs, drawn, kept) = collect_until(
        d,
        &cfg,
        spec.survivors,
        spec.max_trees,
        |r, o| {
            let sel = select_leaves(&o, p, seed, r);
            let phi = SelectedLeaves { selected: &sel };
            let complete = if o.censored { o.complete_subtrees() } else { vec![true; o.tree.node_count()] };
            let view = PruneView::with_values(&o.tree, &phi, phi.vertex_values(&o.tree), complete);
            match view.survives(1.0) {
                Certified::Uncertain => Obs::Uncertain,
                Certified::Known(false) => Obs::Extinct,
                Certified::Known(true) => match view.first_vertex(1.0) {
                    Walk::Vertex(fv) => Obs::Offspring(fv.offspring),
                    Walk::Uncertain => Obs::Uncertain,
                    Walk::Extinct => Obs::Extinct,
                },
            }
        },
        |o| matches!(o, Obs::Offspring(_)),
    );
    if kept < spec.survivors {
        return Err(ExperimentError::Starvation { got: kept, need: spec.survivors });
    }
    Ok((obs, drawn))
}
