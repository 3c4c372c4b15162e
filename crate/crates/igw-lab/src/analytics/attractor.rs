use super::AnalyticsError;
use crate::offspring::{Criticality, OffspringDistribution};

/// (Q(z + (1-z)x) - z - (1-z)x) / ((1-x)(1-Q'(x))), whose limit as x → 1
/// is the constant term of the limiting pruned law.
pub fn attractor_limit(d: &OffspringDistribution, z: f64, x: f64) -> f64 {
    let y = z + (1.0 - z) * x;
    d.q_minus_id(y) / ((1.0 - x) * d.one_minus_dq(x))
}

/// Expected limit: (1-z)^{2-L}/(2-L) for critical laws, 1-z for subcritical.
pub fn attractor_target(d: &OffspringDistribution, z: f64) -> Result<f64, AnalyticsError> {
    if !(0.0..=1.0).contains(&z) {
        return Err(AnalyticsError::Domain(format!("z={z} outside [0, 1]")));
    }
    match d.classify() {
        Criticality::Subcritical => Ok(1.0 - z),
        Criticality::Supercritical => Err(AnalyticsError::Domain("supercritical offspring law".into())),
        Criticality::Critical => {
            let e = 2.0 - d.estimate_l()?.l;
            Ok((1.0 - z).powf(e) / e)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn igw_is_a_fixed_point() {
        for &q in &[0.5, 2.0 / 3.0, 0.9] {
            let d = OffspringDistribution::igw(q).unwrap();
            for &z in &[0.0, 0.3, 0.8] {
                let t = attractor_target(&d, z).unwrap();
                assert!((t - q * (1.0 - z).powf(1.0 / q)).abs() < 1e-9);
                for &x in &[0.0, 0.5, 0.99, 1.0 - 1e-6] {
                    assert!((attractor_limit(&d, z, x) - t).abs() < 1e-9, "q={q} z={z} x={x}");
                }
            }
        }
    }

    #[test]
    fn zipf_approaches_target() {
        let d = OffspringDistribution::zipf_critical(1.5).unwrap();
        let t = 0.7f64.powf(1.5) / 1.5;
        let v = attractor_limit(&d, 0.3, 1.0 - 1e-4);
        assert!((v / t - 1.0).abs() < 0.03, "{v} vs {t}");
        assert!((attractor_target(&d, 0.3).unwrap() / t - 1.0).abs() < 1e-3);
    }

    #[test]
    fn subcritical_target() {
        let d = OffspringDistribution::table(vec![0.6, 0.0, 0.4]).unwrap();
        assert!((attractor_limit(&d, 0.3, 1.0 - 1e-6) - 0.7).abs() < 1e-3);
        assert_eq!(attractor_target(&d, 0.3).unwrap(), 0.7);
    }
}
