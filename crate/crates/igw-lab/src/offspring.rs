//! Offspring laws, their generating functions and regularity functionals.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::{gamma, ln_gamma};
use thiserror::Error;

use crate::special::{hurwitz_zeta, ln_gamma_ratio, polylog, polylog_exp_neg_tail, u_plus_log1m, zeta};

/// Number of cached tail probabilities used by the sampler's fast path.
const TAIL_CACHE: usize = 64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OffspringError {
    /// A family parameter lies outside its admissible range.
    #[error("parameter {name}={value} outside {range}")]
    OutOfRange { name: &'static str, value: f64, range: &'static str },
    /// The zipf construction gives q0 outside (0,1).
    #[error("construction infeasible: {0}")]
    Infeasible(String),
    /// Table probabilities do not sum to one.
    #[error("table pmf sums to {0}, not 1")]
    Normalization(f64),
    /// Offspring laws here have q1 = 0.
    #[error("q1 must be 0, got {0}")]
    NonzeroQ1(f64),
    #[error("negative probability {value} at k={k}")]
    Negative { k: usize, value: f64 },
    #[error("cannot parse distribution spec '{0}'")]
    Parse(String),
    #[error("io: {0}")]
    Io(String),
    /// Truncated series would need more terms than allowed.
    #[error("series truncation bound unachievable: {0}")]
    Truncation(String),
    /// The estimator requires a critical law.
    #[error("distribution is {0:?}, estimator needs a critical law")]
    NotCritical(Criticality),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Criticality {
    Subcritical,
    Critical,
    Supercritical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum Family {
    /// Q(z) = z + q(1-z)^{1/q}; q = 1/2 is the critical binary law.
    Igw { q: f64 },
    /// q_k = c k^{-(α+1)} for k ≥ 2, normalized to mean one.
    Zipf { alpha: f64 },
    /// X - 2 geometric with ratio r given X ≥ 2, mean one.
    Geometric { r: f64 },
    Table { q: Vec<f64> },
}

/// An offspring law with q1 = 0.
#[derive(Debug, Clone, PartialEq)]
pub struct OffspringDistribution {
    family: Family,
    q0: f64,
    /// zipf: c; geometric: P(X ≥ 2).
    c: f64,
    mean: f64,
    second_moment_finite: bool,
    /// tails[k] = P(X > k) for k ≤ TAIL_CACHE.
    tails: Vec<f64>,
}

impl fmt::Display for OffspringDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.family {
            Family::Igw { q } => write!(f, "igw:{q}"),
            Family::Zipf { alpha } => write!(f, "zipf:{alpha}"),
            Family::Geometric { r } => write!(f, "geometric:{r}"),
            Family::Table { q } => {
                let parts: Vec<String> = q.iter().map(|x| x.to_string()).collect();
                write!(f, "pmf:{}", parts.join(","))
            }
        }
    }
}

/// IGW(q) probability q_k by the ratio recurrence q_{k+1}/q_k = (k-1/q)/(k+1).
pub fn igw_pmf(q: f64, k: u64) -> Result<f64, OffspringError> {
    check_igw(q)?;
    Ok(match k {
        0 => q,
        1 => 0.0,
        _ => {
            let mut p = (1.0 - q) / (2.0 * q);
            for j in 2..k {
                let j = j as f64;
                p *= (j - 1.0 / q) / (j + 1.0);
            }
            p
        }
    })
}

/// IGW(q) probability by the Gamma form (1-q)Γ(k-1/q)/(qΓ(2-1/q)k!), q in (1/2,1).
pub fn igw_pmf_gamma(q: f64, k: u64) -> f64 {
    match k {
        0 => q,
        1 => 0.0,
        _ => {
            let k = k as f64;
            let a = 1.0 / q;
            ((1.0 - q) / q).ln().exp()
                * (ln_gamma_ratio(k, -a, 1.0) - ln_gamma(2.0 - a)).exp()
        }
    }
}

fn check_igw(q: f64) -> Result<(), OffspringError> {
    if (0.5..1.0).contains(&q) {
        Ok(())
    } else {
        Err(OffspringError::OutOfRange { name: "q", value: q, range: "[1/2, 1)" })
    }
}

impl OffspringDistribution {
    pub fn igw(q: f64) -> Result<Self, OffspringError> {
        check_igw(q)?;
        Ok(Self::build(Family::Igw { q }, q, 0.0, 1.0, q == 0.5))
    }

    pub fn critical_binary() -> Self {
        Self::igw(0.5).expect("valid")
    }

    /// Critical zipf law with c = 1/(ζ(α)-1) and q0 = 1 - c(ζ(α+1)-1).
    pub fn zipf_critical(alpha: f64) -> Result<Self, OffspringError> {
        if !(alpha > 1.0 && alpha <= 2.0) {
            return Err(OffspringError::OutOfRange { name: "alpha", value: alpha, range: "(1, 2]" });
        }
        let c = 1.0 / (zeta(alpha) - 1.0);
        let q0 = 1.0 - c * (zeta(alpha + 1.0) - 1.0);
        if !(q0 > 0.0 && q0 < 1.0) {
            return Err(OffspringError::Infeasible(format!("alpha={alpha} gives q0={q0}")));
        }
        Ok(Self::build(Family::Zipf { alpha }, q0, c, 1.0, false))
    }

    /// Critical law with P(X = k) = s(1-r)r^{k-2} for k ≥ 2, s = (1-r)/(2-r).
    pub fn geometric_critical(r: f64) -> Result<Self, OffspringError> {
        if !(r > 0.0 && r < 1.0) {
            return Err(OffspringError::OutOfRange { name: "r", value: r, range: "(0, 1)" });
        }
        let s = (1.0 - r) / (2.0 - r);
        Ok(Self::build(Family::Geometric { r }, 1.0 - s, s, 1.0, true))
    }

    pub fn table(q: Vec<f64>) -> Result<Self, OffspringError> {
        if q.is_empty() {
            return Err(OffspringError::Normalization(0.0));
        }
        for (k, &p) in q.iter().enumerate() {
            if !(p >= 0.0 && p.is_finite()) {
                return Err(OffspringError::Negative { k, value: p });
            }
        }
        if q.len() > 1 && q[1] != 0.0 {
            return Err(OffspringError::NonzeroQ1(q[1]));
        }
        let total: f64 = q.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(OffspringError::Normalization(total));
        }
        let mean = q.iter().enumerate().map(|(k, p)| k as f64 * p).sum();
        Ok(Self::build(Family::Table { q: q.clone() }, q[0], 0.0, mean, true))
    }

    /// Loads `{"q": [q0, q1, ...]}`.
    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self, OffspringError> {
        #[derive(Deserialize)]
        struct TableFile {
            q: Vec<f64>,
        }
        let text = std::fs::read_to_string(path.as_ref()).map_err(|e| OffspringError::Io(e.to_string()))?;
        let t: TableFile = serde_json::from_str(&text).map_err(|e| OffspringError::Parse(e.to_string()))?;
        Self::table(t.q)
    }

    /// Parses `igw:0.5`, `binary`, `zipf:1.5`, `geometric[:r]`, `table:<path>`
    /// or an inline `pmf:q0,q1,...`.
    pub fn parse(spec: &str) -> Result<Self, OffspringError> {
        let (name, arg) = match spec.split_once(':') {
            Some((n, a)) => (n.trim(), Some(a.trim())),
            None => (spec.trim(), None),
        };
        let num = |a: Option<&str>| -> Result<f64, OffspringError> {
            a.and_then(|s| s.parse::<f64>().ok()).ok_or_else(|| OffspringError::Parse(spec.to_string()))
        };
        match name {
            "igw" => Self::igw(num(arg)?),
            "binary" | "critical-binary" => Ok(Self::critical_binary()),
            "zipf" => Self::zipf_critical(num(arg)?),
            "geometric" => Self::geometric_critical(if arg.is_some() { num(arg)? } else { 0.5 }),
            "table" => Self::from_json_file(arg.ok_or_else(|| OffspringError::Parse(spec.to_string()))?),
            "pmf" => {
                let a = arg.ok_or_else(|| OffspringError::Parse(spec.to_string()))?;
                let q: Result<Vec<f64>, _> = a.split(',').map(|s| s.trim().parse::<f64>()).collect();
                Self::table(q.map_err(|_| OffspringError::Parse(spec.to_string()))?)
            }
            _ => Err(OffspringError::Parse(spec.to_string())),
        }
    }

    fn build(family: Family, q0: f64, c: f64, mean: f64, second_moment_finite: bool) -> Self {
        let mut d = Self { family, q0, c, mean, second_moment_finite, tails: Vec::new() };
        d.tails = (0..=TAIL_CACHE as u64).map(|k| d.tail_uncached(k)).collect();
        d
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    pub fn q0(&self) -> f64 {
        self.q0
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn has_finite_second_moment(&self) -> bool {
        self.second_moment_finite
    }

    pub fn classify(&self) -> Criticality {
        classify_mean(self.mean)
    }

    /// IGW parameter when this is an IGW law.
    pub fn igw_q(&self) -> Option<f64> {
        match self.family {
            Family::Igw { q } => Some(q),
            _ => None,
        }
    }

    pub fn pmf(&self, k: u64) -> f64 {
        match &self.family {
            Family::Igw { q } => {
                if k <= TAIL_CACHE as u64 || *q == 0.5 {
                    igw_pmf(*q, k).expect("checked")
                } else {
                    igw_pmf_gamma(*q, k)
                }
            }
            Family::Zipf { alpha } => match k {
                0 => self.q0,
                1 => 0.0,
                _ => self.c * (k as f64).powf(-alpha - 1.0),
            },
            Family::Geometric { r } => match k {
                0 => self.q0,
                1 => 0.0,
                _ => self.c * (1.0 - r) * r.powi(k as i32 - 2),
            },
            Family::Table { q } => q.get(k as usize).copied().unwrap_or(0.0),
        }
    }

    /// q_0, ..., q_{n-1}.
    pub fn pmf_vec(&self, n: usize) -> Vec<f64> {
        match &self.family {
            Family::Igw { q } => {
                let mut v = vec![0.0; n];
                if n > 0 {
                    v[0] = *q;
                }
                if n > 2 {
                    v[2] = (1.0 - q) / (2.0 * q);
                }
                for k in 3..n {
                    let j = (k - 1) as f64;
                    v[k] = v[k - 1] * (j - 1.0 / q) / (j + 1.0);
                }
                v
            }
            _ => (0..n as u64).map(|k| self.pmf(k)).collect(),
        }
    }

    /// P(X > k).
    pub fn tail(&self, k: u64) -> f64 {
        if (k as usize) < self.tails.len() {
            self.tails[k as usize]
        } else {
            self.tail_uncached(k)
        }
    }

    /// P(X ≥ k).
    pub fn at_least(&self, k: u64) -> f64 {
        if k == 0 {
            1.0
        } else {
            self.tail(k - 1)
        }
    }

    fn tail_uncached(&self, k: u64) -> f64 {
        if k == 0 {
            return 1.0 - self.q0;
        }
        match &self.family {
            Family::Igw { q } => {
                let a = 1.0 / q - 1.0;
                if k == 1 {
                    1.0 - q
                } else if *q == 0.5 {
                    0.0
                } else if k <= TAIL_CACHE as u64 {
                    let mut t = 1.0 - q;
                    for j in 2..=k {
                        let j = j as f64;
                        t *= (j - 1.0 - a) / j;
                    }
                    t
                } else {
                    let k = k as f64;
                    q * a * (ln_gamma_ratio(k, -a, 1.0) - ln_gamma(1.0 - a)).exp()
                }
            }
            Family::Zipf { alpha } => self.c * hurwitz_zeta(alpha + 1.0, k as f64 + 1.0),
            Family::Geometric { r } => self.c * r.powi((k - 1) as i32),
            Family::Table { q } => q.iter().skip(k as usize + 1).sum(),
        }
    }

    /// E[X; X ≥ k].
    pub fn truncated_mean(&self, k: u64) -> f64 {
        if k <= 1 {
            return self.mean;
        }
        match &self.family {
            Family::Igw { q } => {
                let a = 1.0 / q - 1.0;
                let n = k - 2;
                if n <= TAIL_CACHE as u64 {
                    let mut d = 1.0;
                    for j in 1..=n {
                        let j = j as f64;
                        d *= (j - a) / j;
                    }
                    d
                } else if *q == 0.5 {
                    0.0
                } else {
                    let n = n as f64;
                    (ln_gamma_ratio(n, 1.0 - a, 1.0) - ln_gamma(1.0 - a)).exp()
                }
            }
            Family::Zipf { alpha } => self.c * hurwitz_zeta(*alpha, k as f64),
            Family::Geometric { r } => self.c * r.powi(k as i32 - 2) * (k as f64 + r / (1.0 - r)),
            Family::Table { q } => q.iter().enumerate().skip(k as usize).map(|(j, p)| j as f64 * p).sum(),
        }
    }

    /// Smallest k with P(X > k) < v, or None if that k exceeds `cap`.
    /// With v uniform on (0,1] this is an exact inverse-CDF draw.
    pub fn inverse_tail(&self, v: f64, cap: u64) -> Option<u64> {
        let cached = self.tails.len() as u64 - 1;
        for k in 0..=cached.min(cap) {
            if self.tails[k as usize] < v {
                return Some(k);
            }
        }
        if cap <= cached || self.tail(cap) >= v {
            return None;
        }
        let mut lo = cached;
        let mut hi = (2 * cached).min(cap);
        while self.tail(hi) >= v {
            lo = hi;
            hi = hi.saturating_mul(2).min(cap);
        }
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if self.tail(mid) < v {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Some(hi)
    }

    /// Generating function Q(z) on [0, 1].
    pub fn q_eval(&self, z: f64) -> f64 {
        match &self.family {
            Family::Igw { q } => z + q * (1.0 - z).powf(1.0 / q),
            Family::Geometric { r } => self.q0 + self.c * (1.0 - r) * z * z / (1.0 - r * z),
            Family::Zipf { alpha } => {
                if z >= 0.5 {
                    z + self.q_minus_id(z)
                } else {
                    self.q0 + self.c * (polylog(alpha + 1.0, z) - z)
                }
            }
            Family::Table { q } => q.iter().rev().fold(0.0, |acc, &p| acc * z + p),
        }
    }

    /// m-th derivative of Q at z in [0, 1].
    pub fn q_derivative(&self, z: f64, m: u32) -> Result<f64, OffspringError> {
        if m == 0 {
            return Ok(self.q_eval(z));
        }
        if m == 1 {
            return Ok(1.0 - self.one_minus_dq(z));
        }
        let u = 1.0 - z;
        match &self.family {
            Family::Igw { q } => {
                let e = 1.0 / q;
                let mut coef = *q;
                for i in 0..m {
                    coef *= -(e - i as f64);
                }
                Ok(if coef == 0.0 { 0.0 } else { coef * u.powf(e - m as f64) })
            }
            Family::Geometric { r } => {
                let mut f = 1.0;
                for i in 2..=m {
                    f *= i as f64;
                }
                Ok(self.c * (1.0 - r) * f * r.powi(m as i32 - 2) / (1.0 - r * z).powi(m as i32 + 1))
            }
            Family::Zipf { .. } => {
                let kmax = if u <= 0.0 { f64::INFINITY } else { (2.0 * m as f64 + 60.0) / u + m as f64 };
                if kmax > 5e7 {
                    return Err(OffspringError::Truncation(format!("Q^({m}) at z={z} needs {kmax:e} terms")));
                }
                Ok(falling_sum(|k| self.pmf(k), m, z, kmax as u64))
            }
            Family::Table { q } => Ok(falling_sum(|k| q.get(k as usize).copied().unwrap_or(0.0), m, z, q.len() as u64)),
        }
    }

    /// Q(x) - x, computed without cancellation near x = 1.
    pub fn q_minus_id(&self, x: f64) -> f64 {
        let u = 1.0 - x;
        match &self.family {
            Family::Igw { q } => q * u.powf(1.0 / q),
            Family::Geometric { r } => u * u / ((2.0 - r) * (1.0 - r * x)),
            Family::Zipf { alpha } => {
                if u <= 0.0 {
                    0.0
                } else if u < 0.5 {
                    let mu = -(-u).ln_1p();
                    (1.0 + self.c) * u_plus_log1m(u) + self.c * polylog_exp_neg_tail(alpha + 1.0, mu, 2)
                } else {
                    self.q0 + self.c * (polylog(alpha + 1.0, x) - x) - x
                }
            }
            Family::Table { q } => {
                let convex: f64 = q.iter().enumerate().skip(2).map(|(k, p)| p * power_excess(k as u64, u)).sum();
                convex + (1.0 - self.mean) * u
            }
        }
    }

    /// 1 - Q'(x), computed without cancellation near x = 1.
    pub fn one_minus_dq(&self, x: f64) -> f64 {
        let u = 1.0 - x;
        match &self.family {
            Family::Igw { q } => u.powf(1.0 / q - 1.0),
            Family::Geometric { r } => u * (2.0 - r - r * x) / ((2.0 - r) * (1.0 - r * x).powi(2)),
            Family::Zipf { alpha } => {
                if u <= 0.0 {
                    0.0
                } else if u < 0.5 {
                    let mu = -(-u).ln_1p();
                    -(1.0 + self.c) * mu.exp_m1() - self.c * mu.exp() * polylog_exp_neg_tail(*alpha, mu, 1)
                } else if x == 0.0 {
                    1.0
                } else {
                    1.0 + self.c - self.c * polylog(*alpha, x) / x
                }
            }
            Family::Table { q } => {
                let lx = (-u).ln_1p();
                let s: f64 = q
                    .iter()
                    .enumerate()
                    .skip(2)
                    .map(|(k, p)| -(k as f64) * p * ((k as f64 - 1.0) * lx).exp_m1())
                    .sum();
                (1.0 - self.mean) + s
            }
        }
    }

    /// g(x) = (Q(x) - x)/(1 - x)^2.
    pub fn g_value(&self, x: f64) -> f64 {
        let u = 1.0 - x;
        self.q_minus_id(x) / (u * u)
    }

    /// g(x) from the coefficients E[(X-m-1)_+], plus (1-mean)/(1-x) so that
    /// Q(x) - x = (1-x)^2 g(x) holds for non-critical laws too.
    pub fn g_series(&self, x: f64) -> f64 {
        let mut a = self.mean - 1.0 + self.q0;
        let mut sum = 0.0;
        let mut p = 1.0;
        for m in 0..2_000_000u64 {
            let term = a * p;
            sum += term;
            if m > 8 && term.abs() <= 1e-17 * sum.abs() {
                break;
            }
            a -= self.at_least(m + 2);
            if a <= 0.0 {
                break;
            }
            p *= x;
        }
        sum + (1.0 - self.mean) / (1.0 - x)
    }

    /// Evaluates (1-x)g'(x)/g(x) = 2 - (1-x)(1-Q'(x))/(Q(x)-x) at
    /// x = 1 - 10^{-j}, j = 2..8, and extrapolates the limit L.
    pub fn estimate_l(&self) -> Result<RegularityProfile, OffspringError> {
        if self.classify() != Criticality::Critical {
            return Err(OffspringError::NotCritical(self.classify()));
        }
        let probes: Vec<(f64, f64)> = (2..=8)
            .map(|j| {
                let x = 1.0 - 10f64.powi(-j);
                let u = 1.0 - x;
                (x, 2.0 - u * self.one_minus_dq(x) / self.q_minus_id(x))
            })
            .collect();
        let vals: Vec<f64> = probes.iter().map(|p| p.1).collect();
        let (l, converged) = extrapolate(&vals, 1e-2);
        let lambda = match self.estimate_lambda(40) {
            LambdaEstimate::Estimate { value, .. } => Some(value),
            LambdaEstimate::NotApplicable => None,
        };
        Ok(RegularityProfile { l, lambda, probes, converged })
    }

    /// Evaluates k P(X ≥ k)/E[X; X ≥ k] at k = 2^j, j = 1..=max_log2.
    pub fn estimate_lambda(&self, max_log2: u32) -> LambdaEstimate {
        if self.second_moment_finite {
            return LambdaEstimate::NotApplicable;
        }
        let probes: Vec<(u64, f64)> = (1..=max_log2)
            .map(|j| {
                let k = 1u64 << j;
                (k, k as f64 * self.at_least(k) / self.truncated_mean(k))
            })
            .collect();
        let n = probes.len();
        let value = probes[n - 1].1;
        let converged = n >= 2 && (probes[n - 1].1 - probes[n - 2].1).abs() < 1e-3;
        LambdaEstimate::Estimate { value, probes, converged }
    }
}

pub fn classify_mean(mean: f64) -> Criticality {
    if (mean - 1.0).abs() <= 1e-9 {
        Criticality::Critical
    } else if mean < 1.0 {
        Criticality::Subcritical
    } else {
        Criticality::Supercritical
    }
}

/// x^k - 1 + k u with x = 1 - u, a nonnegative quantity.
fn power_excess(k: u64, u: f64) -> f64 {
    let kf = k as f64;
    if kf * u < 0.5 {
        // Σ_{j≥2} C(k,j)(-u)^j
        let mut term = kf * (kf - 1.0) / 2.0 * u * u;
        let mut sum = 0.0;
        let mut j = 2.0;
        while term != 0.0 {
            sum += term;
            if term.abs() <= 1e-18 * sum.abs() {
                break;
            }
            term *= -u * (kf - j) / (j + 1.0);
            j += 1.0;
        }
        sum
    } else {
        (kf * (-u).ln_1p()).exp_m1() + kf * u
    }
}

/// Σ_k p(k) k(k-1)...(k-m+1) z^{k-m} for k < kmax.
fn falling_sum(p: impl Fn(u64) -> f64, m: u32, z: f64, kmax: u64) -> f64 {
    let mut sum = 0.0;
    for k in (m as u64).max(2)..kmax {
        let mut f = 1.0;
        for i in 0..m as u64 {
            f *= (k - i) as f64;
        }
        sum += p(k) * f * z.powi((k - m as u64) as i32);
    }
    sum
}

/// Aitken extrapolation of a sequence with a convergence flag: the last step
/// must be below `tol` and no larger than the one before it.
fn extrapolate(vals: &[f64], tol: f64) -> (f64, bool) {
    let n = vals.len();
    let (a, b, c) = (vals[n - 3], vals[n - 2], vals[n - 1]);
    let d1 = b - a;
    let d2 = c - b;
    let converged = d2.abs() < tol && d2.abs() <= d1.abs() + 1e-12;
    let denom = d2 - d1;
    let limit = if denom.abs() > 1e-300 && d2.abs() < d1.abs() { c - d2 * d2 / denom } else { c };
    (limit, converged)
}

/// Probe sequence and extrapolated limit for the regularity exponent L.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegularityProfile {
    pub l: f64,
    /// Λ when the law has infinite second moment.
    pub lambda: Option<f64>,
    /// (x, (1-x)g'(x)/g(x)) at each probe point.
    pub probes: Vec<(f64, f64)>,
    pub converged: bool,
}

impl RegularityProfile {
    /// Attractor parameter 1/(2-L), with L clamped to [0, 1] against
    /// extrapolation noise.
    pub fn attractor_q(&self) -> f64 {
        1.0 / (2.0 - self.l.clamp(0.0, 1.0))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum LambdaEstimate {
    /// Finite second moment: Λ is not defined.
    NotApplicable,
    Estimate { value: f64, probes: Vec<(u64, f64)>, converged: bool },
}

/// L implied by Λ through 1/(2-L) = 1-Λ.
pub fn l_from_lambda(lambda: f64) -> f64 {
    2.0 - 1.0 / (1.0 - lambda)
}

/// Γ(x) re-exported for tests and analytics.
pub fn gamma_fn(x: f64) -> f64 {
    gamma(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn all_families() -> Vec<OffspringDistribution> {
        vec![
            OffspringDistribution::critical_binary(),
            OffspringDistribution::igw(2.0 / 3.0).unwrap(),
            OffspringDistribution::igw(0.9).unwrap(),
            OffspringDistribution::zipf_critical(1.5).unwrap(),
            OffspringDistribution::zipf_critical(2.0).unwrap(),
            OffspringDistribution::geometric_critical(0.5).unwrap(),
            OffspringDistribution::table(vec![0.6, 0.0, 0.4]).unwrap(),
            OffspringDistribution::table(vec![0.5, 0.0, 0.25, 0.125, 0.125]).unwrap(),
        ]
    }

    #[test]
    fn igw_pmf_examples() {
        assert_eq!(igw_pmf(0.5, 0).unwrap(), 0.5);
        assert_eq!(igw_pmf(0.5, 2).unwrap(), 0.5);
        assert_eq!(igw_pmf(0.5, 3).unwrap(), 0.0);
        assert!((igw_pmf(2.0 / 3.0, 2).unwrap() - 0.25).abs() < 1e-15);
        assert!((igw_pmf(2.0 / 3.0, 3).unwrap() - 1.0 / 24.0).abs() < 1e-15);
        assert!(igw_pmf(0.4, 0).is_err());
        assert!(igw_pmf(1.0, 0).is_err());
    }

    #[test]
    fn igw_pmf_matches_series_of_closed_form() {
        // coefficients of z + q(1-z)^{1/q} by the binomial series
        for &q in &[0.5, 0.6, 2.0 / 3.0, 0.9] {
            let a = 1.0 / q;
            let mut binom = 1.0;
            for k in 0..40u64 {
                if k > 0 {
                    binom *= (a - (k - 1) as f64) / k as f64;
                }
                let coef = q * binom * if k % 2 == 0 { 1.0 } else { -1.0 } + if k == 1 { 1.0 } else { 0.0 };
                assert!((igw_pmf(q, k).unwrap() - coef).abs() < 1e-14, "q={q} k={k}");
            }
        }
    }

    #[test]
    fn igw_gamma_form_agrees() {
        for &q in &[0.55, 2.0 / 3.0, 0.75, 0.9] {
            for k in 2..=50 {
                let a = igw_pmf(q, k).unwrap();
                let b = igw_pmf_gamma(q, k);
                assert!(((a - b) / a).abs() < 1e-9, "q={q} k={k}");
            }
        }
    }

    #[test]
    fn normalization_and_q1() {
        for d in all_families() {
            assert_eq!(d.pmf(1), 0.0);
            let n = 200_000;
            let v = d.pmf_vec(n);
            assert!(v.iter().all(|&p| p >= 0.0));
            let partial: f64 = v.iter().sum();
            // partial sum plus exact tail P(X ≥ n) must be one
            let total = partial + d.at_least(n as u64);
            assert!((total - 1.0).abs() < 1e-12, "{d}: {total}");
        }
    }

    #[test]
    fn tails_match_pmf_sums() {
        for d in all_families() {
            let v = d.pmf_vec(100);
            for k in [0u64, 1, 2, 5, 20, 63, 64, 65, 80] {
                let direct = 1.0 - v[..=k as usize].iter().sum::<f64>();
                assert!((d.tail(k) - direct).abs() < 1e-12, "{d} k={k}: {} vs {direct}", d.tail(k));
            }
        }
    }

    #[test]
    fn truncated_means() {
        for d in all_families() {
            let v = d.pmf_vec(2_000_000);
            for k in [2u64, 3, 10, 100] {
                let head: f64 = v.iter().enumerate().skip(k as usize).map(|(j, p)| j as f64 * p).sum();
                let t = d.truncated_mean(k);
                let direct = head + d.truncated_mean(v.len() as u64);
                assert!((t - direct).abs() <= 1e-9 * t.max(1e-300) + 1e-15, "{d} k={k}: {t} vs {direct}");
            }
        }
    }

    #[test]
    fn generating_function_values() {
        let igw = OffspringDistribution::igw(2.0 / 3.0).unwrap();
        assert!((igw.q_eval(0.0) - 2.0 / 3.0).abs() < 1e-15);
        let b = OffspringDistribution::critical_binary();
        assert!((b.q_eval(0.6) - 0.68).abs() < 1e-15);
        for d in all_families() {
            if d.classify() == Criticality::Critical {
                assert!((d.q_eval(1.0) - 1.0).abs() < 1e-12, "{d}");
                assert!((d.q_derivative(1.0, 1).unwrap() - 1.0).abs() < 1e-12, "{d}");
            }
        }
    }

    #[test]
    fn closed_form_matches_power_series() {
        for d in all_families() {
            let v = d.pmf_vec(400_000);
            for i in 1..10 {
                let z = i as f64 / 10.0;
                let series: f64 = v.iter().rev().fold(0.0, |acc, &p| acc * z + p);
                assert!((d.q_eval(z) - series).abs() < 1e-10, "{d} z={z}");
                let dseries: f64 = v.iter().enumerate().skip(2).map(|(k, p)| k as f64 * p * z.powi(k as i32 - 1)).sum();
                assert!((d.q_derivative(z, 1).unwrap() - dseries).abs() < 1e-10, "{d} z={z}");
                let d2: f64 = v
                    .iter()
                    .enumerate()
                    .skip(2)
                    .map(|(k, p)| (k * (k - 1)) as f64 * p * z.powi(k as i32 - 2))
                    .sum();
                assert!((d.q_derivative(z, 2).unwrap() - d2).abs() < 1e-9 * d2.max(1.0), "{d} z={z}");
            }
        }
    }

    #[test]
    fn stable_forms_match_naive_away_from_one() {
        for d in all_families() {
            for &x in &[0.0, 0.2, 0.45, 0.55, 0.7, 0.9, 0.99] {
                let naive_a = d.q_eval(x) - x;
                let naive_b = 1.0 - d.q_derivative(x, 1).unwrap();
                let a = d.q_minus_id(x);
                let b = d.one_minus_dq(x);
                assert!((a - naive_a).abs() < 1e-12, "{d} x={x}: {a} vs {naive_a}");
                assert!((b - naive_b).abs() < 1e-11, "{d} x={x}: {b} vs {naive_b}");
            }
        }
    }

    #[test]
    fn zipf_stable_forms_against_direct_sums_near_one() {
        // positive-term sums with the tail beyond K completed by Hurwitz zeta
        let d = OffspringDistribution::zipf_critical(1.5).unwrap();
        for &u in &[1e-2, 1e-3] {
            let x: f64 = 1.0 - u;
            let kmax = (80.0 / u) as u64;
            let mut a = 0.0;
            let mut b = 0.0;
            for k in 2..kmax {
                a += d.pmf(k) * power_excess(k, u);
                b += k as f64 * d.pmf(k) * -((k as f64 - 1.0) * (-u).ln_1p()).exp_m1();
            }
            a += u * d.truncated_mean(kmax) - d.at_least(kmax);
            b += d.truncated_mean(kmax);
            assert!(((d.q_minus_id(x) - a) / a).abs() < 1e-9, "A at u={u}");
            assert!(((d.one_minus_dq(x) - b) / b).abs() < 1e-9, "B at u={u}");
        }
    }

    #[test]
    fn g_value_examples() {
        let b = OffspringDistribution::critical_binary();
        for &x in &[0.0, 0.3, 0.9, 0.999] {
            assert!((b.g_value(x) - 0.5).abs() < 1e-12);
        }
        let q = 2.0 / 3.0;
        let igw = OffspringDistribution::igw(q).unwrap();
        for &x in &[0.1, 0.5, 0.8] {
            let expect = q * (1.0f64 - x).powf(1.0 / q - 2.0);
            assert!((igw.g_value(x) - expect).abs() < 1e-10);
            assert!((igw.g_series(x) - expect).abs() < 1e-10);
        }
        let sub = OffspringDistribution::table(vec![0.6, 0.0, 0.4]).unwrap();
        assert!((sub.g_value(0.0) - 0.6).abs() < 1e-15);
        assert!((sub.g_series(0.0) - 0.6).abs() < 1e-15);
    }

    #[test]
    fn g_identity_on_grid() {
        for d in all_families() {
            for i in 1..10 {
                let x = i as f64 / 10.0;
                let lhs = d.q_eval(x) - x;
                let rhs = (1.0 - x) * (1.0 - x) * d.g_series(x);
                assert!((lhs - rhs).abs() < 1e-9, "{d} x={x}: {lhs} vs {rhs}");
            }
        }
    }

    #[test]
    fn regularity_estimates() {
        let l = |d: &OffspringDistribution| d.estimate_l().unwrap();
        let b = l(&OffspringDistribution::critical_binary());
        assert!(b.l.abs() < 0.01 && b.converged);
        let i = l(&OffspringDistribution::igw(2.0 / 3.0).unwrap());
        assert!((i.l - 0.5).abs() < 0.02 && i.converged);
        let z = l(&OffspringDistribution::zipf_critical(1.5).unwrap());
        assert!((z.l - 0.5).abs() < 0.05 && z.converged, "{z:?}");
        let z2 = l(&OffspringDistribution::zipf_critical(2.0).unwrap());
        assert!(z2.l.abs() < 0.05, "{z2:?}");
        let g = l(&OffspringDistribution::geometric_critical(0.5).unwrap());
        assert!(g.l.abs() < 0.01);
        assert!(OffspringDistribution::table(vec![0.6, 0.0, 0.4]).unwrap().estimate_l().is_err());
    }

    #[test]
    fn lambda_estimates_and_consistency() {
        let val = |d: OffspringDistribution| match d.estimate_lambda(40) {
            LambdaEstimate::Estimate { value, converged, .. } => {
                assert!(converged);
                value
            }
            LambdaEstimate::NotApplicable => panic!("expected estimate"),
        };
        let z = val(OffspringDistribution::zipf_critical(1.5).unwrap());
        assert!((z - 1.0 / 3.0).abs() < 0.05);
        let i = val(OffspringDistribution::igw(2.0 / 3.0).unwrap());
        assert!((i - 1.0 / 3.0).abs() < 0.05);
        assert_eq!(OffspringDistribution::critical_binary().estimate_lambda(40), LambdaEstimate::NotApplicable);
        // 1/(2-L) = 1-Λ
        let zl = OffspringDistribution::zipf_critical(1.5).unwrap().estimate_l().unwrap();
        assert!((l_from_lambda(z) - zl.l).abs() < 0.05);
        assert!((1.0 / (2.0 - zl.l) - (1.0 - z)).abs() < 0.02);
    }

    #[test]
    fn zipf_construction() {
        for &a in &[1.2, 1.5, 1.8, 2.0] {
            let d = OffspringDistribution::zipf_critical(a).unwrap();
            let v = d.pmf_vec(1_000_000);
            let mean: f64 = v.iter().enumerate().map(|(k, p)| k as f64 * p).sum::<f64>() + d.truncated_mean(1_000_000);
            assert!((mean - 1.0).abs() < 1e-10, "alpha={a}: {mean}");
            assert!(d.q0() > 0.0 && d.q0() < 1.0);
        }
        let d = OffspringDistribution::zipf_critical(1.5).unwrap();
        assert!((d.q0() - 0.78821).abs() < 1e-5);
        let c = 1.0 / (zeta(1.5) - 1.0);
        assert!((d.pmf(10_000) * 10_000f64.powf(2.5) - c).abs() < 1e-12);
        assert!(OffspringDistribution::zipf_critical(1.0).is_err());
        assert!(OffspringDistribution::zipf_critical(2.5).is_err());
    }

    #[test]
    fn classification_and_parsing() {
        assert_eq!(OffspringDistribution::igw(0.7).unwrap().classify(), Criticality::Critical);
        assert_eq!(OffspringDistribution::table(vec![0.6, 0.0, 0.4]).unwrap().classify(), Criticality::Subcritical);
        assert_eq!(OffspringDistribution::table(vec![0.4, 0.0, 0.6]).unwrap().classify(), Criticality::Supercritical);
        assert!(OffspringDistribution::table(vec![0.5, 0.1, 0.4]).is_err());
        assert!(OffspringDistribution::table(vec![0.5, 0.0, 0.4]).is_err());
        assert_eq!(OffspringDistribution::parse("igw:0.5").unwrap(), OffspringDistribution::critical_binary());
        assert_eq!(OffspringDistribution::parse("zipf:1.5").unwrap().q0(), OffspringDistribution::zipf_critical(1.5).unwrap().q0());
        assert!(OffspringDistribution::parse("geometric").is_ok());
        assert!(OffspringDistribution::parse("pmf:0.6,0,0.4").is_ok());
        assert!(OffspringDistribution::parse("nope:1").is_err());
        let dir = std::env::temp_dir().join("igw_table_test.json");
        std::fs::write(&dir, "{\"q\": [0.5, 0, 0.5]}").unwrap();
        let t = OffspringDistribution::parse(&format!("table:{}", dir.display())).unwrap();
        assert_eq!(t.pmf(2), 0.5);
    }

    #[test]
    fn inverse_tail_is_exact_inverse() {
        for d in all_families() {
            for &v in &[1.0, 0.9, 0.5, 0.3, 0.05, 1e-3, 1e-6, 1e-9] {
                let k = d.inverse_tail(v, u64::MAX).unwrap();
                assert!(d.tail(k) < v, "{d} v={v}");
                if k > 0 {
                    assert!(d.tail(k - 1) >= v, "{d} v={v} k={k}");
                }
            }
        }
        let z = OffspringDistribution::zipf_critical(1.5).unwrap();
        assert_eq!(z.inverse_tail(1e-12, 1000), None);
    }
}
