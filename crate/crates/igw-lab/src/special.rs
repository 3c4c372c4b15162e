//! Real zeta, Hurwitz zeta and polylogarithm evaluations in double precision.

use std::f64::consts::PI;

use statrs::function::gamma::{gamma, ln_gamma};

/// B_{2j} / (2j)! for j = 1..=8.
const BERNOULLI_OVER_FACT: [f64; 8] = [
    1.0 / 12.0,
    -1.0 / 720.0,
    1.0 / 30240.0,
    -1.0 / 1209600.0,
    1.0 / 47900160.0,
    -691.0 / 1307674368000.0,
    1.0 / 74724249600.0,
    -3617.0 / 10670622842880000.0,
];

/// Hurwitz zeta ζ(s, a) = Σ_{n≥0} (a+n)^{-s} by Euler-Maclaurin, for s ≥ 0,
/// s ≠ 1 and a > 0. Below s = 1 this is the analytic continuation.
pub fn hurwitz_zeta(s: f64, a: f64) -> f64 {
    assert!(a > 0.0 && s != 1.0, "hurwitz_zeta domain: s={s}, a={a}");
    let n = if a >= 12.0 { 0 } else { (12.0 - a).ceil() as usize };
    let mut sum = 0.0;
    for i in 0..n {
        sum += (a + i as f64).powf(-s);
    }
    let x = a + n as f64;
    let xs = x.powf(-s);
    let mut tail = x * xs / (s - 1.0) + 0.5 * xs;
    // rising factorial s(s+1)...(s+2j-2) times x^{-s-2j+1}
    let mut rising = s;
    let mut xp = xs / x;
    let x2 = x * x;
    for (j, b) in BERNOULLI_OVER_FACT.iter().enumerate() {
        let term = b * rising * xp;
        tail += term;
        if term.abs() < 1e-17 * (sum + tail).abs() {
            break;
        }
        let k = 2.0 * j as f64 + 1.0;
        rising *= (s + k) * (s + k + 1.0);
        xp /= x2;
    }
    sum + tail
}

/// Riemann zeta for real s ≠ 1, with the reflection formula below zero.
pub fn zeta(s: f64) -> f64 {
    if s >= 0.0 {
        hurwitz_zeta(s, 1.0)
    } else if s.fract() == 0.0 && (s as i64) % 2 == 0 {
        0.0
    } else {
        let t = 1.0 - s;
        2f64.powf(s) * PI.powf(s - 1.0) * (PI * s / 2.0).sin() * gamma(t) * zeta(t)
    }
}

fn harmonic(n: u32) -> f64 {
    (1..=n).map(|k| 1.0 / k as f64).sum()
}

/// Li_s(e^{-μ}) with the first `skip` regular terms ζ(s-k)(-μ)^k/k! of the
/// expansion around μ = 0 removed. The singular part, Γ(1-s)μ^{s-1} or the
/// logarithmic term for positive integer s, is always kept.
///
/// Uses the expansion Li_s(e^{-μ}) = Γ(1-s)μ^{s-1} + Σ ζ(s-k)(-μ)^k/k!,
/// which converges for μ < 2π; intended for 0 < μ ≤ 1.5.
pub fn polylog_exp_neg_tail(s: f64, mu: f64, skip: usize) -> f64 {
    assert!(mu > 0.0 && mu <= 2.0, "polylog expansion needs 0 < mu <= 2, got {mu}");
    let integer = s >= 1.0 && s.fract() == 0.0;
    let log_k = if integer { Some(s as usize - 1) } else { None };
    let mut total = match log_k {
        Some(k) => {
            let mut pw = 1.0;
            for i in 1..=k {
                pw *= -mu / i as f64;
            }
            pw * (harmonic(k as u32) - mu.ln())
        }
        None => gamma(1.0 - s) * mu.powf(s - 1.0),
    };
    let mut pw = 1.0;
    let mut small = 0;
    for k in 0..200usize {
        if k > 0 {
            pw *= -mu / k as f64;
        }
        if Some(k) == log_k || k < skip {
            continue;
        }
        let term = zeta(s - k as f64) * pw;
        total += term;
        if term.abs() <= 1e-18 * total.abs().max(1e-300) {
            small += 1;
            if small >= 3 {
                break;
            }
        } else {
            small = 0;
        }
    }
    total
}

/// ln Γ(z+x) - ln Γ(z+y) without cancellation for large z.
pub fn ln_gamma_ratio(z: f64, x: f64, y: f64) -> f64 {
    if z < 1e4 {
        return ln_gamma(z + x) - ln_gamma(z + y);
    }
    let b2 = |t: f64| t * t - t + 1.0 / 6.0;
    let b3 = |t: f64| t * t * t - 1.5 * t * t + 0.5 * t;
    let b4 = |t: f64| t.powi(4) - 2.0 * t.powi(3) + t * t - 1.0 / 30.0;
    (x - y) * z.ln() + (b2(x) - b2(y)) / (2.0 * z) - (b3(x) - b3(y)) / (6.0 * z * z)
        + (b4(x) - b4(y)) / (12.0 * z * z * z)
}

/// Li_s(x) for x in [0, 1), s > 0.
pub fn polylog(s: f64, x: f64) -> f64 {
    assert!((0.0..1.0).contains(&x), "polylog needs 0 <= x < 1");
    if x == 0.0 {
        return 0.0;
    }
    if x <= 0.5 {
        let mut sum = 0.0;
        let mut p = 1.0;
        for k in 1..2000 {
            p *= x;
            let term = p * (k as f64).powf(-s);
            sum += term;
            if term < 1e-18 * sum {
                break;
            }
        }
        sum
    } else {
        polylog_exp_neg_tail(s, -x.ln(), 0)
    }
}

/// u + ln(1-u), accurate for small u.
pub fn u_plus_log1m(u: f64) -> f64 {
    if u < 0.1 {
        let mut sum = 0.0;
        let mut p = u;
        for j in 2..200 {
            p *= u;
            let term = p / j as f64;
            sum += term;
            if term < 1e-18 * sum {
                break;
            }
        }
        -sum
    } else {
        u + (-u).ln_1p()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zeta_values() {
        assert!((zeta(2.0) - PI * PI / 6.0).abs() < 1e-14);
        assert!((zeta(4.0) - PI.powi(4) / 90.0).abs() < 1e-14);
        assert!((zeta(0.0) + 0.5).abs() < 1e-14);
        assert!((zeta(-1.0) + 1.0 / 12.0).abs() < 1e-14);
        assert!((zeta(-3.0) - 1.0 / 120.0).abs() < 1e-14);
        assert_eq!(zeta(-2.0), 0.0);
        // ζ(1/2) and ζ(3/2) reference values
        assert!((zeta(0.5) + 1.460354508809586).abs() < 1e-12);
        assert!((zeta(1.5) - 2.612375348685488).abs() < 1e-13);
        assert!((zeta(-0.5) + 0.20788622497735457).abs() < 1e-12);
    }

    #[test]
    fn hurwitz_against_direct_sums() {
        for &(s, a) in &[(2.5, 1.0), (2.5, 7.3), (1.5, 3.0), (3.0, 1e6)] {
            let direct: f64 = (0..200_000).map(|n| (a + n as f64).powf(-s)).sum::<f64>();
            // tail beyond the direct range by the integral estimate
            let rest = hurwitz_zeta(s, a + 200_000.0);
            assert!(((direct + rest) - hurwitz_zeta(s, a)).abs() < 1e-12 * hurwitz_zeta(s, a));
        }
        assert!((hurwitz_zeta(2.0, 2.0) - (PI * PI / 6.0 - 1.0)).abs() < 1e-14);
    }

    #[test]
    fn polylog_matches_direct_series() {
        for &s in &[1.5, 2.0, 2.5, 3.0, 0.5] {
            for &x in &[0.3f64, 0.6, 0.9, 0.99] {
                let direct: f64 = (1..20000).map(|k| x.powi(k) * (k as f64).powf(-s)).sum();
                let v = polylog(s, x);
                assert!((v - direct).abs() < 1e-12 * direct.abs().max(1.0), "s={s} x={x}: {v} vs {direct}");
            }
        }
        // Li_1(x) = -ln(1-x)
        assert!((polylog(1.0, 0.7) + (0.3f64).ln()).abs() < 1e-13);
    }

    #[test]
    fn gamma_ratio_continuity() {
        for &(x, y) in &[(-0.5, 1.0), (0.0, 1.0), (0.5, 0.0), (-0.1111, 1.0)] {
            let below = ln_gamma(9999.0 + x) - ln_gamma(9999.0 + y);
            let above = ln_gamma_ratio(9999.0, x, y);
            let direct = ln_gamma_ratio(9998.999, x, y);
            assert!((below - above).abs() < 1e-10);
            assert!((direct - below).abs() < 1e-6);
            // Γ(z+1)/Γ(z) = z
            assert!((ln_gamma_ratio(1e12, 1.0, 0.0) - 1e12f64.ln()).abs() < 1e-14);
        }
    }

    #[test]
    fn small_u_helper() {
        for &u in &[0.05f64, 0.09, 0.3] {
            let exact = u + (-u).ln_1p();
            assert!((u_plus_log1m(u) - exact).abs() <= 1e-14 * exact.abs());
        }
        // leading terms -u^2/2 - u^3/3
        for &u in &[1e-8f64, 1e-4] {
            let lead = -u * u / 2.0 - u * u * u / 3.0;
            assert!((u_plus_log1m(u) - lead).abs() <= u.powi(4));
        }
    }
}
