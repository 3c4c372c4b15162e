use super::certify::{Certified, EdgeCall, PruneView, Walk};
use super::{collect_until, majority_report, pilot_threshold, sample_batch, ExperimentError, ExperimentReport, ExperimentSpec, Table};
use crate::analytics::{height_survival_pt, pushforward_offspring};
use crate::offspring::OffspringDistribution;
use crate::pruning::{EdgeLaw, Phi, PhiFunctional};
use crate::stats::{chi_square_pmf, fit_exponential_rate, Expect, GofReport};

const PILOT_TREES: u64 = 20_000;
/// Pilot samples use replicate indices from here on, away from main runs.
const PILOT_OFFSET: u64 = 1 << 40;
const PMF_LEN: usize = 200;

/// `spec.thresholds` if given, else from `target_p`: closed form for height on
/// IGW laws, pilot quantiles otherwise.
pub(crate) fn thresholds(
    spec: &ExperimentSpec,
    d: &OffspringDistribution,
    phi: PhiFunctional,
) -> Result<Vec<f64>, ExperimentError> {
    if !spec.thresholds.is_empty() {
        return Ok(spec.thresholds.clone());
    }
    let targets = if spec.target_p.is_empty() { vec![0.5] } else { spec.target_p.clone() };
    if let (PhiFunctional::Height, Some(q)) = (phi, d.igw_q()) {
        let l = spec.lambda;
        return Ok(targets.iter().map(|p| (p.powf(-(1.0 - q) / q) - 1.0) / (l * (1.0 - q))).collect());
    }
    let cfg = spec.sample_config(spec.seed, phi.law() == EdgeLaw::Additive);
    let values = sample_batch(d, &cfg, PILOT_OFFSET, PILOT_TREES, |_, o| {
        if o.censored {
            f64::INFINITY
        } else {
            phi.value(&o.tree)
        }
    });
    Ok(targets.iter().map(|&p| pilot_threshold(values.clone(), p)).collect())
}

/// First-vertex statistics of pruned trees conditioned on survival.
pub(crate) struct Survivors {
    pub offspring: Vec<u64>,
    pub stems: Vec<f64>,
    pub drawn: u64,
    pub uncertain: u64,
}

impl Survivors {
    pub fn count(&self) -> u64 {
        self.stems.len() as u64
    }

    pub fn p_hat(&self) -> f64 {
        self.count() as f64 / (self.drawn - self.uncertain) as f64
    }
}

pub(crate) fn collect_survivors(
    spec: &ExperimentSpec,
    d: &OffspringDistribution,
    phi: PhiFunctional,
    t: f64,
    seed: u64,
) -> Result<Survivors, ExperimentError> {
    let cfg = spec.sample_config(seed, true);
    let (walks, drawn, kept) = collect_until(
        d,
        &cfg,
        spec.survivors,
        spec.max_trees,
        |_, o| PruneView::new(&o, &phi).first_vertex(t),
        |w| matches!(w, Walk::Vertex(_)),
    );
    if kept < spec.survivors {
        return Err(ExperimentError::Starvation { got: kept, need: spec.survivors });
    }
    let mut s = Survivors { offspring: Vec::new(), stems: Vec::new(), drawn, uncertain: 0 };
    for w in walks {
        match w {
            Walk::Extinct => {}
            Walk::Uncertain => s.uncertain += 1,
            Walk::Vertex(fv) => {
                if s.offspring.len() <= fv.offspring {
                    s.offspring.resize(fv.offspring + 1, 0);
                }
                s.offspring[fv.offspring] += 1;
                s.stems.push(fv.stem);
            }
        }
    }
    Ok(s)
}

/// Prunes IGW trees and checks that survivors are again IGW(q) with edge
/// rate λ p_t^{(1-q)/q}.
pub fn run_invariance(spec: &ExperimentSpec) -> Result<ExperimentReport, ExperimentError> {
    let q = spec.igw_q()?;
    let d = spec.distribution()?;
    let phi = spec.phi_or(PhiFunctional::Length);
    let t = thresholds(spec, &d, phi)?[0];
    let pmf = d.pmf_vec(PMF_LEN);
    let tol = spec.tolerance.unwrap_or(0.02);
    let mut chi = Vec::new();
    let mut rates = Vec::new();
    let mut report = ExperimentReport::new(spec);
    let mut table = Table::new("runs", &["seed", "threshold", "p_hat", "survivors", "uncertain", "rate", "expected_rate"]);
    for seed in spec.seeds() {
        let s = collect_survivors(spec, &d, phi, t, seed)?;
        let p_hat = s.p_hat();
        chi.push(chi_square_pmf(&s.offspring, &pmf, 0)?.report("offspring_chi2", spec.alpha, Expect::AtMost));
        let expected = match phi {
            PhiFunctional::Height => spec.lambda / (spec.lambda * (1.0 - q) * t + 1.0),
            _ => spec.lambda * p_hat.powf((1.0 - q) / q),
        };
        let fit = fit_exponential_rate(&s.stems)?;
        let rel = (fit.rate / expected - 1.0).abs();
        table.push(vec![
            seed as f64,
            t,
            p_hat,
            s.count() as f64,
            s.uncertain as f64,
            fit.rate,
            expected,
        ]);
        rates.push(
            GofReport::new("edge_rate", rel, s.count() as usize, tol, Expect::AtMost)
                .with("rate", fit.rate)
                .with("interval", (fit.lower, fit.upper))
                .with("expected", expected)
                .with("p_hat", p_hat),
        );
    }
    report.checks.push(majority_report(chi));
    report.checks.push(majority_report(rates));
    if phi == PhiFunctional::Height {
        let p = height_survival_pt(q, spec.lambda, t)?;
        report.notes.push(format!("closed-form survival probability at t = {t}: {p}"));
    }
    report.tables.push(table);
    Ok(report)
}

/// Prunes a critical law and tests the survivors' offspring law against the
/// original: non-IGW laws must be rejected, IGW controls must not. The
/// pushforward law at the observed survival rate must fit in every case.
pub fn run_uniqueness_falsification(spec: &ExperimentSpec) -> Result<ExperimentReport, ExperimentError> {
    let d = spec.distribution()?;
    let phi = spec.phi_or(PhiFunctional::Length);
    let t = thresholds(spec, &d, phi)?[0];
    let control = d.igw_q().is_some();
    let pmf = d.pmf_vec(PMF_LEN);
    let mut same = Vec::new();
    let mut push = Vec::new();
    let mut report = ExperimentReport::new(spec);
    for seed in spec.seeds() {
        let s = collect_survivors(spec, &d, phi, t, seed)?;
        let expect = if control { Expect::AtMost } else { Expect::Above };
        same.push(
            chi_square_pmf(&s.offspring, &pmf, 0)?
                .report(if control { "control_chi2" } else { "falsification_chi2" }, spec.alpha, expect)
                .with("p_hat", s.p_hat())
                .with("threshold", t),
        );
        let law = pushforward_offspring(&d, s.p_hat(), 60)?;
        push.push(chi_square_pmf(&s.offspring, &law.g, 1)?.report("pushforward_chi2", spec.alpha, Expect::AtMost));
    }
    report.checks.push(majority_report(same));
    report.checks.push(majority_report(push));
    Ok(report)
}

/// Joint law of (k, m) at the first vertex, k its offspring count and m the
/// number of children whose planted subtree survives pruning, given that the
/// tree survives. Cells are (k, m ≥ 1) and one cell for m = 0.
pub fn run_thinning(spec: &ExperimentSpec) -> Result<ExperimentReport, ExperimentError> {
    let d = spec.distribution()?;
    let phi = spec.phi_or(PhiFunctional::Height);
    let t = thresholds(spec, &d, phi)?[0];
    let exact_p = match (phi, d.igw_q()) {
        (PhiFunctional::Height, Some(q)) => Some(height_survival_pt(q, spec.lambda, t)?),
        _ => None,
    };
    let k_max = (2..200u64).find(|&k| d.tail(k) < 1e-13).unwrap_or(200) as usize;
    let index = |k: usize, m: usize| 1 + (k - 1) * k / 2 + (m - 1);
    let cells = 1 + k_max * (k_max + 1) / 2;
    let mut runs = Vec::new();
    let mut report = ExperimentReport::new(spec);
    for seed in spec.seeds() {
        let cfg = spec.sample_config(seed, true);
        let obs_of = |_: u64, o: crate::sampler::SampleOutcome| -> Option<Certified<(usize, usize)>> {
            let view = PruneView::new(&o, &phi);
            match view.survives(t) {
                Certified::Uncertain => return Some(Certified::Uncertain),
                Certified::Known(false) => return None,
                Certified::Known(true) => {}
            }
            if !o.is_expanded(1) {
                return Some(Certified::Uncertain);
            }
            let mut m = 0;
            for c in o.tree.children(1) {
                match view.call(c, t) {
                    EdgeCall::Uncertain => return Some(Certified::Uncertain),
                    EdgeCall::Dropped => {}
                    _ => m += 1,
                }
            }
            Some(Certified::Known((o.tree.children(1).len(), m)))
        };
        let (obs, drawn, kept) = collect_until(&d, &cfg, spec.survivors, spec.max_trees, obs_of, |x| {
            matches!(x, Some(Certified::Known(_)))
        });
        if kept < spec.survivors {
            return Err(ExperimentError::Starvation { got: kept, need: spec.survivors });
        }
        let uncertain = obs.iter().filter(|x| matches!(x, Some(Certified::Uncertain))).count() as u64;
        let p = exact_p.unwrap_or(kept as f64 / (drawn - uncertain) as f64);
        let mut counts = vec![0u64; cells + 1];
        for (k, m) in obs.iter().filter_map(|x| match x {
            Some(Certified::Known(km)) => Some(*km),
            _ => None,
        }) {
            let i = if m == 0 { 0 } else if k <= k_max { index(k, m) } else { cells };
            counts[i] += 1;
        }
        let mut probs = vec![0.0; cells];
        probs[0] = d.q_minus_id(1.0 - p) / p;
        for k in 1..=k_max {
            let qk = d.pmf(k as u64);
            let mut binom = 1.0;
            for m in 1..=k {
                binom *= (k - m + 1) as f64 / m as f64;
                probs[index(k, m)] = qk * binom * p.powi(m as i32 - 1) * (1.0 - p).powi((k - m) as i32);
            }
        }
        let fitted = usize::from(exact_p.is_none());
        runs.push(
            chi_square_pmf(&counts, &probs, fitted)?
                .report("thinning_chi2", spec.alpha, Expect::AtMost)
                .with("p", p)
                .with("threshold", t)
                .with("uncertain", uncertain),
        );
    }
    report.checks.push(majority_report(runs));
    Ok(report)
}
