use num_rational::BigRational;
use num_traits::One;

use super::{check_q, AnalyticsError};

/// w_1..w_N with W(z) = Σ w_n z^n solving z = W/(1-W)^{1/q}:
/// w_n = (-1)^{n-1} ∏_{i=0}^{n-2} (n/q - i)/(i + 2).
pub fn lagrange_w_coeffs(q: f64, n: usize) -> Result<Vec<f64>, AnalyticsError> {
    check_q(q)?;
    Ok((1..=n)
        .map(|m| {
            let a = m as f64 / q;
            let mut w = 1.0;
            for i in 0..m - 1 {
                w *= (a - i as f64) / (i as f64 + 2.0);
            }
            if m % 2 == 0 {
                -w
            } else {
                w
            }
        })
        .collect())
}

/// The same coefficients in exact arithmetic for rational q.
pub fn lagrange_w_coeffs_exact(q: &BigRational, n: usize) -> Vec<BigRational> {
    let inv = BigRational::one() / q;
    (1..=n)
        .map(|m| {
            let a = BigRational::from_integer(m.into()) * &inv;
            let mut w = BigRational::one();
            for i in 0..m - 1 {
                w = w * (&a - BigRational::from_integer(i.into())) / BigRational::from_integer((i + 2).into());
            }
            if m % 2 == 0 {
                -w
            } else {
                w
            }
        })
        .collect()
}

/// W(z) from the first `terms` coefficients.
pub fn lagrange_w_eval(q: f64, z: f64, terms: usize) -> Result<f64, AnalyticsError> {
    let c = lagrange_w_coeffs(q, terms)?;
    Ok(c.iter().rev().fold(0.0, |acc, w| (acc + w) * z))
}

/// |W/(1-W)^{1/q} - z| with W summed to `terms` coefficients.
pub fn lagrange_round_trip_residual(q: f64, z: f64, terms: usize) -> Result<f64, AnalyticsError> {
    let w = lagrange_w_eval(q, z, terms)?;
    Ok((w / (1.0 - w).powf(1.0 / q) - z).abs())
}
