use serde::{Deserialize, Serialize};

use super::AnalyticsError;
use crate::offspring::{Criticality, Family, OffspringDistribution};

/// Offspring law {g_m} of the pruned tree given survival, with the factor
/// 1 - Q'(1-p) applied to the edge rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PushforwardLaw {
    pub p: f64,
    /// g_0, ..., g_M.
    pub g: Vec<f64>,
    /// Mass beyond M, 1 - Σ_{m ≤ M} g_m.
    pub tail_mass: f64,
    pub rate_multiplier: f64,
}

impl PushforwardLaw {
    pub fn g0(&self) -> f64 {
        self.g[0]
    }

    pub fn pmf(&self, m: usize) -> f64 {
        self.g.get(m).copied().unwrap_or(0.0)
    }

    pub fn max_order(&self) -> usize {
        self.g.len() - 1
    }

    /// Total variation distance to `other` over 0..=M, tails lumped.
    pub fn tv_distance(&self, other: &[f64]) -> f64 {
        let m = self.g.len();
        let head: f64 = (0..m).map(|i| (self.g[i] - other.get(i).copied().unwrap_or(0.0)).abs()).sum();
        let other_tail = 1.0 - other.iter().take(m).sum::<f64>();
        0.5 * (head + (self.tail_mass - other_tail).abs())
    }
}

/// Pushforward of GW({q_k}) under a pruning with survival probability p.
///
/// IGW and geometric laws use closed-form derivative ratios; zipf and table
/// laws sum the binomial thinning Σ_k q_k C(k,m) p^m (1-p)^{k-m} / (p B),
/// truncated where the binomial weight is negligible.
pub fn pushforward_offspring(d: &OffspringDistribution, p: f64, m_max: usize) -> Result<PushforwardLaw, AnalyticsError> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(AnalyticsError::Domain(format!("p={p} outside (0, 1]")));
    }
    if d.classify() == Criticality::Supercritical {
        return Err(AnalyticsError::Domain("supercritical offspring law".into()));
    }
    let m_max = m_max.max(2);
    let x = 1.0 - p;
    let b = d.one_minus_dq(x);
    let mut g = vec![0.0; m_max + 1];
    g[0] = d.q_minus_id(x) / (p * b);
    match d.family() {
        Family::Igw { q } => {
            g[2] = (1.0 - q) / (2.0 * q);
            for m in 2..m_max {
                g[m + 1] = g[m] * (m as f64 - 1.0 / q) / (m as f64 + 1.0);
            }
        }
        Family::Geometric { r } => {
            g[2] = p * d.q_derivative(x, 2)? / (2.0 * b);
            let ratio = p * r / (1.0 - r * x);
            for m in 2..m_max {
                g[m + 1] = g[m] * ratio;
            }
        }
        Family::Zipf { .. } | Family::Table { .. } => {
            let kmax = match d.family() {
                Family::Table { q } => q.len() as u64,
                _ => ((2.0 * m_max as f64 + 80.0) / p).ceil() as u64 + m_max as u64,
            };
            for (m, gm) in g.iter_mut().enumerate().skip(2) {
                *gm = thinning_sum(d, p, m as u64, kmax) / (p * b);
            }
        }
    }
    let total: f64 = g.iter().sum();
    let tail_mass = 1.0 - total;
    if tail_mass < -1e-10 {
        return Err(AnalyticsError::Normalization(-tail_mass));
    }
    Ok(PushforwardLaw { p, g, tail_mass, rate_multiplier: b })
}

/// Σ_{m ≤ k < kmax} q_k C(k,m) p^m (1-p)^{k-m}.
fn thinning_sum(d: &OffspringDistribution, p: f64, m: u64, kmax: u64) -> f64 {
    if p == 1.0 {
        return d.pmf(m);
    }
    // binomial weight in log space at k = m, then by ratio
    let mut w = (m as f64 * p.ln()).exp();
    let mut log_scale = 0.0;
    if w < 1e-280 {
        log_scale = m as f64 * p.ln();
        w = 1.0;
    }
    let mut sum = 0.0;
    let lq = (-p).ln_1p();
    let q1 = lq.exp();
    for k in m..kmax.max(m + 1) {
        sum += d.pmf(k) * w;
        w *= (k + 1) as f64 / (k + 1 - m) as f64 * q1;
        if w > 1e250 {
            sum *= 1e-250;
            w *= 1e-250;
            log_scale += 250.0 * std::f64::consts::LN_10;
        }
    }
    sum * log_scale.exp()
}

/// G(z) = z + (Q(1-p+pz) - (1-p) - pz) / (p(1 - Q'(1-p))).
pub fn pushforward_q(d: &OffspringDistribution, p: f64, z: f64) -> Result<f64, AnalyticsError> {
    if !(p > 0.0 && p <= 1.0) || !(0.0..=1.0).contains(&z) {
        return Err(AnalyticsError::Domain(format!("p={p}, z={z}")));
    }
    let x = 1.0 - p + p * z;
    Ok(z + d.q_minus_id(x) / (p * d.one_minus_dq(1.0 - p)))
}

/// G'(1) = 1 - (1 - mean)/(1 - Q'(1-p)).
pub fn pushforward_mean(d: &OffspringDistribution, p: f64) -> f64 {
    1.0 - (1.0 - d.mean()) / d.one_minus_dq(1.0 - p)
}
