use serde::{Deserialize, Serialize};

use super::pushforward::{pushforward_offspring, PushforwardLaw};
use super::AnalyticsError;
use crate::offspring::OffspringDistribution;

/// Two readings of the offspring generating function after coloring.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColoringVariant {
    /// z + (Q(1-p+g z) - (1-g) - g z)/(g(1-Q'(1-g))).
    AsPrinted,
    /// The pushforward at survival probability g.
    Thinned,
}

/// Probability g_p that a tree holds at least one selected leaf, where each
/// leaf is left unselected with probability p.
///
/// f = 1 - g_p solves f = Q(f) - q0 + q0 p; iterated from f = p.
pub fn coloring_survival(d: &OffspringDistribution, p: f64) -> Result<f64, AnalyticsError> {
    if !(0.0..1.0).contains(&p) {
        return Err(AnalyticsError::Domain(format!("p={p} outside [0, 1)")));
    }
    let q0 = d.q0();
    let mut f = p;
    for _ in 0..50_000_000u64 {
        // Q(f) - q0 + q0 p = f + A(f) - q0 (1-p)
        let next = f + d.q_minus_id(f) - q0 * (1.0 - p);
        let step = (next - f).abs();
        f = next;
        let contraction = d.one_minus_dq(f).max(1e-300);
        if step <= 1e-13 * contraction {
            return Ok(1.0 - f);
        }
    }
    Err(AnalyticsError::MaxTerms(50_000_000))
}

/// Generating function of the colored offspring law at z.
pub fn coloring_q(d: &OffspringDistribution, p: f64, g: f64, z: f64, variant: ColoringVariant) -> f64 {
    let b = d.one_minus_dq(1.0 - g);
    match variant {
        ColoringVariant::Thinned => z + d.q_minus_id(1.0 - g + g * z) / (g * b),
        ColoringVariant::AsPrinted => z + (d.q_eval(1.0 - p + g * z) - (1.0 - g) - g * z) / (g * b),
    }
}

/// Coefficients of the colored offspring law up to order `m_max`.
///
/// The as-printed variant need not sum to one; its tail mass is reported as
/// one minus the head sum and may be negative.
pub fn coloring_offspring(
    d: &OffspringDistribution,
    p: f64,
    variant: ColoringVariant,
    m_max: usize,
) -> Result<PushforwardLaw, AnalyticsError> {
    let g = coloring_survival(d, p)?;
    match variant {
        ColoringVariant::Thinned => pushforward_offspring(d, g, m_max),
        ColoringVariant::AsPrinted => {
            let x = 1.0 - p;
            let b = d.one_minus_dq(1.0 - g);
            let mut coef = vec![0.0; m_max.max(2) + 1];
            coef[0] = (d.q_eval(x) - (1.0 - g)) / (g * b);
            coef[1] = 1.0 - d.one_minus_dq(x) / b;
            let mut scale = g;
            for (m, c) in coef.iter_mut().enumerate().skip(2) {
                scale *= g / m as f64;
                *c = scale / g * d.q_derivative(x, m as u32)? / b;
            }
            let tail_mass = 1.0 - coef.iter().sum::<f64>();
            Ok(PushforwardLaw { p: g, g: coef, tail_mass, rate_multiplier: b })
        }
    }
}
