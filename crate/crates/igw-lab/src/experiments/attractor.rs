use rayon::prelude::*;

use super::certify::{Certified, PruneView, SmallShape};
use super::invariance::thresholds;
use super::{ExperimentError, ExperimentReport, ExperimentSpec, Table};
use crate::analytics::pushforward_offspring;
use crate::offspring::{Criticality, OffspringDistribution};
use crate::pruning::{EdgeLaw, Phi, PhiFunctional};
use crate::sampler::sample;
use crate::stats::{Expect, GofReport};

const M_MAX: usize = 30;
const MIN_SURVIVORS: u64 = 1000;

/// P(shape) under IGW(q) for the tracked shapes: single edge q0, cherry
/// q2 q0², star tripod q3 q0³, caterpillar tripod 2 q2² q0³.
pub fn igw_shape_probabilities(q: f64) -> [f64; 4] {
    let q0 = q;
    let q2 = (1.0 - q) / (2.0 * q);
    let q3 = q2 * (2.0 - 1.0 / q) / 3.0;
    [q0, q2 * q0 * q0, q3 * q0.powi(3), 2.0 * q2 * q2 * q0.powi(3)]
}

fn attractor_q(d: &OffspringDistribution) -> Result<f64, ExperimentError> {
    Ok(d.estimate_l()?.attractor_q())
}

/// Pushforward laws for p on a decreasing grid: g₀(p), total variation
/// distance to IGW(1/(2-L)) (or to the point mass for subcritical laws) and
/// the edge-rate factor 1 - Q'(1-p).
pub fn run_attractor_gf(spec: &ExperimentSpec) -> Result<ExperimentReport, ExperimentError> {
    let d = spec.distribution()?;
    let grid = if spec.p_grid.is_empty() { vec![1e-1, 1e-2, 1e-3, 1e-4] } else { spec.p_grid.clone() };
    let crit = d.classify();
    if crit == Criticality::Supercritical {
        return Err(ExperimentError::Spec("supercritical laws have no attractor".into()));
    }
    let mut report = ExperimentReport::new(spec);
    let target = if crit == Criticality::Critical {
        let profile = d.estimate_l()?;
        report.notes.push(format!("estimated L = {} (converged: {})", profile.l, profile.converged));
        let q = profile.attractor_q();
        let mut v = OffspringDistribution::igw(q)?.pmf_vec(M_MAX + 1);
        v.truncate(M_MAX + 1);
        Some((q, v))
    } else {
        None
    };
    let mut table = Table::new("pushforward", &["p", "g0", "distance", "rate_multiplier"]);
    let mut last_g0 = f64::NAN;
    for &p in &grid {
        let law = pushforward_offspring(&d, p, M_MAX)?;
        let dist = match &target {
            Some((_, pmf)) => law.tv_distance(pmf),
            None => 1.0 - law.g0(),
        };
        table.push(vec![p, law.g0(), dist, law.rate_multiplier]);
        last_g0 = law.g0();
    }
    let p_last = *grid.last().unwrap();
    let check = match &target {
        Some((q, _)) => GofReport::new("g0_limit", (last_g0 - q).abs(), 0, spec.tolerance.unwrap_or(0.02), Expect::AtMost)
            .with("target", *q),
        None => GofReport::new("g0_point_mass", 1.0 - last_g0, 0, spec.tolerance.unwrap_or(1e-3), Expect::AtMost),
    };
    report.checks.push(check.with("p", p_last).with("g0", last_g0));
    report.tables.push(table);
    Ok(report)
}

#[derive(Clone)]
struct LevelCounts {
    survivors: u64,
    uncertain: u64,
    shapes: [u64; 5],
}

fn shape_index(s: SmallShape) -> usize {
    match s {
        SmallShape::SingleEdge => 0,
        SmallShape::Cherry => 1,
        SmallShape::StarTripod => 2,
        SmallShape::CaterpillarTripod => 3,
        SmallShape::Other => 4,
    }
}

/// Small-shape frequencies of pruned critical trees along a threshold (or
/// Horton iteration) schedule, against IGW(1/(2-L)).
pub fn run_attractor_mc(spec: &ExperimentSpec) -> Result<ExperimentReport, ExperimentError> {
    let d = spec.distribution()?;
    if d.classify() != Criticality::Critical {
        return Err(ExperimentError::Spec("the Monte Carlo attractor needs a critical law".into()));
    }
    let q = attractor_q(&d)?;
    let predicted = igw_shape_probabilities(q);
    let horton = !spec.horton_k.is_empty();
    let phi = if horton { PhiFunctional::Ord } else { spec.phi_or(PhiFunctional::Leaves) };
    // (label, threshold)
    let levels: Vec<(f64, f64)> = if horton {
        spec.horton_k.iter().map(|&k| (k as f64, k as f64)).collect()
    } else {
        let ts = thresholds(spec, &d, phi)?;
        if spec.thresholds.is_empty() {
            let targets = if spec.target_p.is_empty() { vec![0.5] } else { spec.target_p.clone() };
            targets.into_iter().zip(ts).collect()
        } else {
            ts.iter().map(|&t| (t, t)).collect()
        }
    };
    let cfg = spec.sample_config(spec.seed, phi.law() == EdgeLaw::Additive);
    let empty = vec![LevelCounts { survivors: 0, uncertain: 0, shapes: [0; 5] }; levels.len()];
    let counts = (0..spec.replicates)
        .into_par_iter()
        .fold(
            || empty.clone(),
            |mut acc, r| {
                let o = sample(&d, &cfg.replicate(r));
                let view = PruneView::new(&o, &phi);
                for (i, &(_, t)) in levels.iter().enumerate() {
                    match view.small_shape(t) {
                        Certified::Uncertain => acc[i].uncertain += 1,
                        Certified::Known(None) => {}
                        Certified::Known(Some(s)) => {
                            acc[i].survivors += 1;
                            acc[i].shapes[shape_index(s)] += 1;
                        }
                    }
                }
                acc
            },
        )
        .reduce(
            || empty.clone(),
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(b) {
                    x.survivors += y.survivors;
                    x.uncertain += y.uncertain;
                    for k in 0..5 {
                        x.shapes[k] += y.shapes[k];
                    }
                }
                a
            },
        );
    let mut report = ExperimentReport::new(spec);
    report.notes.push(format!("attractor IGW({q}); predicted {predicted:?}"));
    let mut table = Table::new(
        "shapes",
        &[
            "level",
            "threshold",
            "p_hat",
            "survivors",
            "uncertain",
            "single_edge",
            "cherry",
            "star_tripod",
            "caterpillar_tripod",
            "max_deviation",
        ],
    );
    let mut deviations = Vec::new();
    for (&(label, t), c) in levels.iter().zip(&counts) {
        let n = c.survivors.max(1) as f64;
        let freq: Vec<f64> = (0..4).map(|k| c.shapes[k] as f64 / n).collect();
        let dev = freq.iter().zip(predicted).map(|(f, p)| (f - p).abs()).fold(0.0, f64::max);
        let p_hat = c.survivors as f64 / (spec.replicates - c.uncertain) as f64;
        table.push(vec![label, t, p_hat, c.survivors as f64, c.uncertain as f64, freq[0], freq[1], freq[2], freq[3], dev]);
        deviations.push((label, dev, c.survivors));
    }
    report.tables.push(table);
    let tol = spec.tolerance.unwrap_or(0.02);
    let judged: Vec<_> = if d.igw_q().is_some() {
        deviations.clone()
    } else {
        let at = spec.verdict_at.unwrap_or(deviations.last().unwrap().0);
        deviations.iter().filter(|x| x.0 == at).cloned().collect()
    };
    if judged.is_empty() {
        return Err(ExperimentError::Spec("verdict level is not in the schedule".into()));
    }
    for &(label, dev, survivors) in &judged {
        if survivors < MIN_SURVIVORS {
            return Err(ExperimentError::Starvation { got: survivors, need: MIN_SURVIVORS });
        }
        report.checks.push(
            GofReport::new("shape_deviation", dev, survivors as usize, tol, Expect::AtMost).with("level", label),
        );
    }
    Ok(report)
}
