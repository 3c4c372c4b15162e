use super::{check_lambda, check_q, AnalyticsError};

/// P(height > t) = (λ(1-q)t + 1)^{-q/(1-q)}, the survival probability of
/// height pruning at threshold t.
pub fn height_survival_pt(q: f64, lambda: f64, t: f64) -> Result<f64, AnalyticsError> {
    check_q(q)?;
    check_lambda(lambda)?;
    if !(t >= 0.0) {
        return Err(AnalyticsError::Domain(format!("t={t} must be nonnegative")));
    }
    Ok((-q / (1.0 - q) * (lambda * (1.0 - q) * t).ln_1p()).exp())
}

/// H(x) = P(height ≤ x).
pub fn height_cdf(q: f64, lambda: f64, x: f64) -> Result<f64, AnalyticsError> {
    let p = height_survival_pt(q, lambda, x)?;
    // 1 - p without cancellation for small x
    let e = -q / (1.0 - q) * (lambda * (1.0 - q) * x).ln_1p();
    Ok(if p > 0.5 { -e.exp_m1() } else { 1.0 - p })
}

/// H'(x) = λq(1 - H(x))^{1/q}.
pub fn height_pdf(q: f64, lambda: f64, x: f64) -> Result<f64, AnalyticsError> {
    let p = height_survival_pt(q, lambda, x)?;
    Ok(lambda * q * p.powf(1.0 / q))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        assert!((height_cdf(0.5, 1.0, 2.0).unwrap() - 0.5).abs() < 1e-15);
        assert!((height_cdf(2.0 / 3.0, 1.0, 3.0).unwrap() - 0.75).abs() < 1e-15);
        assert_eq!(height_cdf(0.7, 2.0, 0.0).unwrap(), 0.0);
        assert_eq!(height_survival_pt(0.7, 2.0, 0.0).unwrap(), 1.0);
        assert!(height_cdf(0.4, 1.0, 1.0).is_err());
        assert!(height_cdf(0.5, 0.0, 1.0).is_err());
        assert!(height_cdf(0.5, 1.0, -1.0).is_err());
    }

    #[test]
    fn binary_closed_form() {
        for i in 0..200 {
            let x = i as f64 * 0.37;
            for &lambda in &[0.5, 1.0, 3.0] {
                let h = height_cdf(0.5, lambda, x).unwrap();
                assert!((h - lambda * x / (lambda * x + 2.0)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn rate_identity() {
        for &q in &[0.5, 0.6, 2.0 / 3.0, 0.9] {
            for i in 0..50 {
                let t = i as f64 * 0.2;
                let p = height_survival_pt(q, 1.5, t).unwrap();
                let lhs = 1.5 * p.powf((1.0 - q) / q);
                assert!((lhs - 1.5 / (1.5 * (1.0 - q) * t + 1.0)).abs() < 1e-12);
            }
        }
    }
}
