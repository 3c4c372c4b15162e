use num_bigint::BigInt;
use num_rational::{BigRational, Ratio};
use num_traits::ToPrimitive;

use super::{majority_report, ExperimentError, ExperimentReport, ExperimentSpec, Table};
use crate::analytics::{
    height_cdf, igw_pmf_rational, length_cdf_bessel, length_tail, size_cdf_exact, size_pmf, size_pmf_exact,
    size_pmf_oracle_exact, size_tail, LengthSeries, LengthTable, SeriesEvalPolicy,
};
use crate::offspring::OffspringDistribution;
use crate::sampler::map_replicates;
use crate::stats::{chi_square_pmf, ks_statistic, Expect, GofReport};

/// Largest y = λqx for which the length series is evaluated.
const LENGTH_Y_MAX: f64 = 50.0;
const LENGTH_TABLE_POINTS: usize = 4000;

fn censor_check(spec: &ExperimentSpec, censored: usize, n: usize) -> Result<f64, ExperimentError> {
    let rate = censored as f64 / n as f64;
    if rate > spec.max_censor_rate {
        return Err(ExperimentError::CensorRate { rate, bound: spec.max_censor_rate });
    }
    Ok(rate)
}

/// Sorted per-tree values, +∞ for censored trees.
fn sampled_values(
    spec: &ExperimentSpec,
    d: &OffspringDistribution,
    f: impl Fn(&crate::tree::MetricTree) -> f64 + Sync + Send,
) -> Result<(Vec<f64>, f64), ExperimentError> {
    let cfg = spec.sample_config(spec.seed, true);
    let mut v = map_replicates(d, &cfg, spec.replicates, |o| if o.censored { f64::INFINITY } else { f(&o.tree) });
    v.sort_by(f64::total_cmp);
    let censored = v.iter().filter(|x| x.is_infinite()).count();
    let rate = censor_check(spec, censored, v.len())?;
    Ok((v, rate))
}

/// KS test of sampled tree heights against H(x) = 1 - (λ(1-q)x + 1)^{-q/(1-q)}.
pub fn run_verify_height(spec: &ExperimentSpec) -> Result<ExperimentReport, ExperimentError> {
    let q = spec.igw_q()?;
    let d = spec.distribution()?;
    let lambda = spec.lambda;
    let tol = spec.tolerance.unwrap_or(0.01);
    let (heights, rate) = sampled_values(spec, &d, |t| t.height())?;
    let range = (rate > 0.0).then(|| {
        // H(x) = 1 - 10·rate
        let p = (10.0 * rate).min(1.0);
        (0.0, (p.powf(-(1.0 - q) / q) - 1.0) / (lambda * (1.0 - q)))
    });
    let d_ks = ks_statistic(&heights, |x| height_cdf(q, lambda, x.max(0.0)).unwrap(), range)?;
    let mut report = ExperimentReport::new(spec);
    let mut main = GofReport::new("height_ks", d_ks, heights.len(), tol, Expect::AtMost).with("censor_rate", rate);
    if let Some(r) = range {
        main = main.with_range(r);
    }
    report.checks.push(main);
    // power: the same sample against a different q
    let q_wrong = if q + 0.1 < 1.0 { q + 0.1 } else { q - 0.1 };
    let d_wrong = ks_statistic(&heights, |x| height_cdf(q_wrong, lambda, x.max(0.0)).unwrap(), range)?;
    report
        .checks
        .push(GofReport::new("height_ks_wrong_q", d_wrong, heights.len(), tol, Expect::Above).with("q_wrong", q_wrong));
    let mut table = Table::new("cdf", &["x", "empirical", "analytic"]);
    let n = heights.len() as f64;
    for i in 1..=50 {
        let x = i as f64 * 0.2 / lambda;
        let emp = heights.partition_point(|&h| h <= x) as f64 / n;
        table.push(vec![x, emp, height_cdf(q, lambda, x)?]);
    }
    report.tables.push(table);
    Ok(report)
}

/// Tail ratios (1 - L(x)) / asymptote at the given points.
fn length_tail_ratios(q: f64, lambda: f64, xs: &[f64]) -> Result<Vec<f64>, ExperimentError> {
    let policy = SeriesEvalPolicy::default();
    xs.iter()
        .map(|&x| {
            let survival = if q == 0.5 {
                1.0 - length_cdf_bessel(lambda, x, &policy)
            } else {
                1.0 - LengthSeries::new(q, lambda * q * x, policy)?.cdf(lambda, x)?
            };
            Ok(survival / length_tail(q, lambda, x))
        })
        .collect()
}

/// Checks that the length tail ratio approaches 1: inside [0.9, 1.1] at
/// the last point and, for q ≠ 1/2, monotonically closer to 1 along `xs`.
pub fn length_tail_report(q: f64, lambda: f64, xs: &[f64]) -> Result<GofReport, ExperimentError> {
    let ratios = length_tail_ratios(q, lambda, xs)?;
    let last = *ratios.last().ok_or_else(|| ExperimentError::Spec("no tail points".into()))?;
    let monotone = ratios.windows(2).all(|w| (w[1] - 1.0).abs() < (w[0] - 1.0).abs());
    let ok = (0.9..=1.1).contains(&last) && (q == 0.5 || monotone);
    let mut r = GofReport::new("length_tail_ratio", (last - 1.0).abs(), xs.len(), 0.1, Expect::AtMost)
        .with("x", xs)
        .with("ratio", &ratios)
        .with("monotone", monotone);
    r.verdict = crate::stats::Verdict::from_bool(ok);
    Ok(r)
}

/// KS test of total lengths against the length law, on x where the law is
/// below 1 - 10·(censor rate) and λqx ≤ 50.
pub fn run_verify_length(spec: &ExperimentSpec) -> Result<ExperimentReport, ExperimentError> {
    let q = spec.igw_q()?;
    let d = spec.distribution()?;
    let lambda = spec.lambda;
    let tol = spec.tolerance.unwrap_or(0.012);
    let policy = SeriesEvalPolicy::default();
    let x_series = LENGTH_Y_MAX / (lambda * q);
    let table = LengthTable::new(q, lambda, x_series, LENGTH_TABLE_POINTS, &policy)?;
    let (lengths, rate) = sampled_values(spec, &d, |t| t.total_length())?;
    let mut hi = x_series;
    if rate > 0.0 {
        let level = 1.0 - 10.0 * rate;
        if table.cdf(x_series).unwrap() > level {
            let (mut a, mut b) = (0.0, x_series);
            for _ in 0..100 {
                let m = 0.5 * (a + b);
                if table.cdf(m).unwrap() > level {
                    b = m;
                } else {
                    a = m;
                }
            }
            hi = a;
        }
    }
    let cdf = |x: f64| table.cdf(x.clamp(0.0, table.x_max())).unwrap();
    let d_ks = ks_statistic(&lengths, cdf, Some((0.0, hi)))?;
    let mut report = ExperimentReport::new(spec);
    report.checks.push(
        GofReport::new("length_ks", d_ks, lengths.len(), tol, Expect::AtMost)
            .with_range((0.0, hi))
            .with("censor_rate", rate),
    );
    if q == 0.5 {
        // the tabulated series against the Bessel closed form
        let worst = (1..=100)
            .map(|i| {
                let x = hi * i as f64 / 100.0;
                (cdf(x) - length_cdf_bessel(lambda, x, &policy)).abs()
            })
            .fold(0.0, f64::max);
        report.checks.push(GofReport::new("length_table_vs_bessel", worst, 100, 1e-8, Expect::AtMost));
    }
    report.checks.push(length_tail_report(q, lambda, &[10.0, 30.0, 50.0])?);
    let mut t = Table::new("cdf", &["x", "empirical", "analytic"]);
    let n = lengths.len() as f64;
    for i in 1..=50 {
        let x = hi * i as f64 / 50.0;
        t.push(vec![x, lengths.partition_point(|&h| h <= x) as f64 / n, cdf(x)]);
    }
    report.tables.push(t);
    Ok(report)
}

pub(crate) fn rational_from_f64(q: f64) -> Option<BigRational> {
    let r = Ratio::<i64>::approximate_float(q)?;
    if (r.to_f64()? - q).abs() > 1e-15 || *r.denom() > 1_000_000 {
        return None;
    }
    Some(BigRational::new(BigInt::from(*r.numer()), BigInt::from(*r.denom())))
}

/// Chi-square of edge counts against the size law for n ≤ 30 plus a merged
/// tail, after an exact comparison of the closed form with the convolution
/// recursion.
pub fn run_verify_size(spec: &ExperimentSpec) -> Result<ExperimentReport, ExperimentError> {
    const N_MAX: usize = 30;
    let q = spec.igw_q()?;
    let d = spec.distribution()?;
    if spec.budget < N_MAX + 2 {
        return Err(ExperimentError::Spec(format!("budget must be at least {}", N_MAX + 2)));
    }
    let mut report = ExperimentReport::new(spec);
    if let Some(qr) = rational_from_f64(q) {
        let oracle = size_pmf_oracle_exact(&igw_pmf_rational(&qr, N_MAX)?, N_MAX);
        let mut mismatches = 0;
        for n in 1..=N_MAX {
            if size_pmf_exact(&qr, n)? != oracle[n] {
                mismatches += 1;
            }
        }
        report.checks.push(GofReport::new("size_exact_vs_recursion", mismatches as f64, N_MAX, 0.0, Expect::AtMost));
    } else {
        report.notes.push(format!("q = {q} has no small rational form; exact precheck skipped"));
    }
    let policy = SeriesEvalPolicy::default();
    let probs: Vec<f64> =
        (0..=N_MAX).map(|n| size_pmf(q, n, &policy)).collect::<Result<_, _>>()?;
    let mut runs = Vec::new();
    for seed in spec.seeds() {
        let cfg = spec.sample_config(seed, false);
        let counts = map_replicates(&d, &cfg, spec.replicates, |o| {
            if o.censored {
                N_MAX + 1
            } else {
                o.tree.edge_count().min(N_MAX + 1)
            }
        });
        let mut obs = vec![0u64; N_MAX + 2];
        for c in counts {
            obs[c] += 1;
        }
        runs.push(chi_square_pmf(&obs, &probs, 0)?.report("size_chi2", spec.alpha, Expect::AtMost));
    }
    report.checks.push(majority_report(runs));
    let mut t = Table::new("pmf", &["n", "probability"]);
    for (n, p) in probs.iter().enumerate().skip(1) {
        t.push(vec![n as f64, *p]);
    }
    report.tables.push(t);
    Ok(report)
}

/// Exact 1 - 𝒜(x) in rational arithmetic against the asymptotic tail.
pub fn size_tail_report(q: &BigRational, x: f64, tol: f64) -> Result<GofReport, ExperimentError> {
    let exact = BigRational::from_integer(1.into()) - size_cdf_exact(q, x)?;
    let exact = crate::analytics::rational_to_f64(&exact);
    let qf = crate::analytics::rational_to_f64(q);
    let asym = size_tail(qf, x);
    let rel = (exact / asym - 1.0).abs();
    Ok(GofReport::new("size_tail_ratio", rel, x as usize, tol, Expect::AtMost)
        .with("exact", exact)
        .with("asymptotic", asym))
}
