//! Goodness-of-fit tests and estimators that turn Monte Carlo output into
//! verdicts.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};
use thiserror::Error;

use crate::tree::CombinatorialTree;

/// Significance level for automated verdicts.
pub const ALPHA: f64 = 0.01;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("need at least {need} samples, got {got}")]
    TooFewSamples { need: usize, got: usize },
    #[error("comparison range [{0}, {1}] holds no samples")]
    EmptyRange(f64, f64),
    #[error("expected counts too small to form two categories")]
    InsufficientMass,
    #[error("invalid input: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
}

impl Verdict {
    pub fn from_bool(ok: bool) -> Self {
        if ok {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }

    pub fn passed(self) -> bool {
        self == Verdict::Pass
    }
}

/// Which side of the threshold passes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Expect {
    /// statistic ≤ threshold passes.
    AtMost,
    /// statistic > threshold passes (a rejection is the goal).
    Above,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GofReport {
    pub test: String,
    pub statistic: f64,
    pub n: usize,
    pub threshold: f64,
    pub expect: Expect,
    pub verdict: Verdict,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub range: Option<(f64, f64)>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dof: Option<usize>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub extra: BTreeMap<String, serde_json::Value>,
}

impl GofReport {
    pub fn new(test: impl Into<String>, statistic: f64, n: usize, threshold: f64, expect: Expect) -> Self {
        let ok = match expect {
            Expect::AtMost => statistic <= threshold,
            Expect::Above => statistic > threshold,
        };
        Self {
            test: test.into(),
            statistic,
            n,
            threshold,
            expect,
            verdict: Verdict::from_bool(ok),
            range: None,
            p_value: None,
            dof: None,
            extra: BTreeMap::new(),
        }
    }

    pub fn with_range(mut self, range: (f64, f64)) -> Self {
        self.range = Some(range);
        self
    }

    pub fn with(mut self, key: &str, value: impl Serialize) -> Self {
        self.extra.insert(key.to_string(), serde_json::to_value(value).expect("serializable"));
        self
    }

    pub fn passed(&self) -> bool {
        self.verdict.passed()
    }

    /// One CSV row: test,statistic,n,threshold,verdict.
    pub fn csv_row(&self) -> String {
        format!("{},{},{},{},{:?}", self.test, self.statistic, self.n, self.threshold, self.verdict)
    }
}

/// Kolmogorov-Smirnov distance between the empirical CDF of sorted
/// `samples` and `cdf`, taken over `range` (the whole line when `None`).
///
/// Samples may contain +∞ for censored draws; they count towards n but
/// never fall inside a finite range.
pub fn ks_statistic(samples: &[f64], cdf: impl Fn(f64) -> f64, range: Option<(f64, f64)>) -> Result<f64, StatsError> {
    let n = samples.len();
    if n < 100 {
        return Err(StatsError::TooFewSamples { need: 100, got: n });
    }
    if samples.windows(2).any(|w| !(w[0] <= w[1])) {
        return Err(StatsError::Invalid("samples must be sorted and not NaN".into()));
    }
    let (lo, hi) = range.unwrap_or((f64::NEG_INFINITY, f64::INFINITY));
    if !(lo <= hi) {
        return Err(StatsError::EmptyRange(lo, hi));
    }
    let nf = n as f64;
    let start = samples.partition_point(|&x| x < lo);
    let end = samples.partition_point(|&x| x <= hi);
    if start >= end {
        return Err(StatsError::EmptyRange(lo, hi));
    }
    let mut d: f64 = 0.0;
    if lo.is_finite() {
        d = d.max((start as f64 / nf - cdf(lo)).abs());
    }
    if hi.is_finite() {
        d = d.max((end as f64 / nf - cdf(hi)).abs());
    }
    let mut i = start;
    while i < end {
        let x = samples[i];
        let mut j = i + 1;
        while j < end && samples[j] == x {
            j += 1;
        }
        let f = cdf(x);
        d = d.max((f - i as f64 / nf).abs()).max((j as f64 / nf - f).abs());
        i = j;
    }
    Ok(d)
}

/// Asymptotic KS critical value √(-ln(α/2)/2)/√n.
pub fn ks_critical(n: usize, alpha: f64) -> f64 {
    (-(alpha / 2.0).ln() / 2.0).sqrt() / (n as f64).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChiSquare {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
    /// (observed, expected) per merged category.
    pub cells: Vec<(u64, f64)>,
}

impl ChiSquare {
    pub fn rejects(&self, alpha: f64) -> bool {
        self.p_value < alpha
    }

    /// Critical value at level `alpha` for this test's degrees of freedom.
    pub fn critical(&self, alpha: f64) -> f64 {
        ChiSquared::new(self.dof as f64).expect("dof ≥ 1").inverse_cdf(1.0 - alpha)
    }

    pub fn report(&self, test: impl Into<String>, alpha: f64, expect: Expect) -> GofReport {
        let n = self.cells.iter().map(|c| c.0).sum::<u64>() as usize;
        let mut r = GofReport::new(test, self.statistic, n, self.critical(alpha), expect);
        r.p_value = Some(self.p_value);
        r.dof = Some(self.dof);
        r
    }
}

/// Pearson chi-square of category counts against probabilities.
///
/// Categories `i ≥ probs.len()` and the missing mass 1 - Σ probs form the
/// tail bucket. Adjacent categories are merged left to right until each
/// expected count reaches 5; a short final group joins its neighbour.
/// `fitted` parameters are subtracted from the degrees of freedom.
pub fn chi_square_pmf(observed: &[u64], probs: &[f64], fitted: usize) -> Result<ChiSquare, StatsError> {
    if probs.iter().any(|&p| !(p >= 0.0)) {
        return Err(StatsError::Invalid("negative or NaN probability".into()));
    }
    let n: u64 = observed.iter().sum();
    let nf = n as f64;
    let head: f64 = probs.iter().sum();
    let tail_p = 1.0 - head;
    if tail_p < -1e-9 {
        return Err(StatsError::Invalid(format!("probabilities sum to {head}")));
    }
    let mut raw: Vec<(u64, f64)> =
        probs.iter().enumerate().map(|(i, &p)| (observed.get(i).copied().unwrap_or(0), p * nf)).collect();
    let tail_obs: u64 = observed.iter().skip(probs.len()).sum();
    if tail_p > 0.0 || tail_obs > 0 {
        raw.push((tail_obs, tail_p.max(0.0) * nf));
    }
    let mut cells: Vec<(u64, f64)> = Vec::new();
    let mut acc = (0u64, 0.0f64);
    for (o, e) in raw {
        acc.0 += o;
        acc.1 += e;
        if acc.1 >= 5.0 {
            cells.push(acc);
            acc = (0, 0.0);
        }
    }
    if acc.0 > 0 || acc.1 > 0.0 {
        match cells.last_mut() {
            Some(last) => {
                last.0 += acc.0;
                last.1 += acc.1;
            }
            None => cells.push(acc),
        }
    }
    if cells.len() < 2 + fitted {
        return Err(StatsError::InsufficientMass);
    }
    let mut statistic = 0.0;
    for &(o, e) in &cells {
        if e <= 0.0 {
            if o > 0 {
                statistic = f64::INFINITY;
            }
            continue;
        }
        let d = o as f64 - e;
        statistic += d * d / e;
    }
    let dof = cells.len() - 1 - fitted;
    let p_value = if statistic.is_finite() {
        ChiSquared::new(dof as f64).expect("dof ≥ 1").sf(statistic)
    } else {
        0.0
    };
    Ok(ChiSquare { statistic, dof, p_value, cells })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub rate: f64,
    pub lower: f64,
    pub upper: f64,
    pub n: usize,
    /// All lengths equal: the exponential model is implausible.
    pub degenerate: bool,
}

impl RateFit {
    pub fn contains(&self, rate: f64) -> bool {
        self.lower <= rate && rate <= self.upper
    }
}

/// Maximum-likelihood exponential rate n/Σx with the exact 95% interval
/// from 2λΣx ~ χ²(2n).
pub fn fit_exponential_rate(lengths: &[f64]) -> Result<RateFit, StatsError> {
    let n = lengths.len();
    if n < 100 {
        return Err(StatsError::TooFewSamples { need: 100, got: n });
    }
    if lengths.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
        return Err(StatsError::Invalid("lengths must be positive and finite".into()));
    }
    let sum: f64 = lengths.iter().sum();
    let chi = ChiSquared::new(2.0 * n as f64).expect("positive dof");
    let degenerate = lengths.iter().all(|&x| x == lengths[0]);
    Ok(RateFit {
        rate: n as f64 / sum,
        lower: chi.inverse_cdf(0.025) / (2.0 * sum),
        upper: chi.inverse_cdf(0.975) / (2.0 * sum),
        n,
        degenerate,
    })
}

/// Counts of canonical shape codes; merges associatively.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ShapeCounter {
    pub counts: BTreeMap<String, u64>,
    pub total: u64,
}

impl ShapeCounter {
    pub fn add(&mut self, t: &CombinatorialTree) {
        self.add_code(t.canonical_code());
    }

    pub fn add_code(&mut self, code: Vec<u8>) {
        let key = String::from_utf8(code).expect("canonical codes are ASCII");
        *self.counts.entry(key).or_insert(0) += 1;
        self.total += 1;
    }

    pub fn merge(mut self, other: ShapeCounter) -> ShapeCounter {
        for (k, v) in other.counts {
            *self.counts.entry(k).or_insert(0) += v;
        }
        self.total += other.total;
        self
    }

    pub fn count(&self, code: &[u8]) -> u64 {
        std::str::from_utf8(code).ok().and_then(|k| self.counts.get(k)).copied().unwrap_or(0)
    }

    pub fn frequency(&self, code: &[u8]) -> f64 {
        if self.total == 0 {
            return 0.0;
        }
        self.count(code) as f64 / self.total as f64
    }

    pub fn frequencies(&self) -> BTreeMap<String, f64> {
        let n = self.total as f64;
        self.counts.iter().map(|(k, &v)| (k.clone(), v as f64 / n)).collect()
    }
}

/// Relative frequency of each canonical shape.
pub fn shape_frequency<'a>(trees: impl IntoIterator<Item = &'a CombinatorialTree>) -> BTreeMap<String, f64> {
    let mut c = ShapeCounter::default();
    for t in trees {
        c.add(t);
    }
    c.frequencies()
}

/// Binomial standard error √(p(1-p)/n).
pub fn binomial_se(p: f64, n: usize) -> f64 {
    (p * (1.0 - p) / n as f64).sqrt()
}

/// True when more than half of the verdicts pass.
pub fn majority(verdicts: &[bool]) -> bool {
    2 * verdicts.iter().filter(|&&v| v).count() > verdicts.len()
}
