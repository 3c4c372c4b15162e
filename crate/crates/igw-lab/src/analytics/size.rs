use std::ops::{Add, Mul};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use statrs::function::gamma::gamma;

use super::{big, big_int, check_q, to_f64, AnalyticsError, SeriesEvalPolicy};
use crate::offspring::OffspringDistribution;

fn check_rational_q(q: &BigRational) -> Result<(BigInt, BigInt), AnalyticsError> {
    let half = BigRational::new(1.into(), 2.into());
    if q < &half || q >= &BigRational::one() {
        return Err(AnalyticsError::Domain(format!("q={q} outside [1/2, 1)")));
    }
    Ok((q.numer().clone(), q.denom().clone()))
}

/// Σ_{k=1}^{m} (-1)^{k-1} C(m', k') Γ(k/q+1)/(k! Γ(k/q-k+2)) q^k with
/// q = a/b, where binom(k) supplies the binomial factor. Summed over the
/// common denominator b^m m!.
fn alternating_exact(a: &BigInt, b: &BigInt, m: usize, binom: impl Fn(usize) -> BigInt) -> BigRational {
    // fact_ratio[k] = m!/k!
    let mut fact_ratio = vec![BigInt::one(); m + 1];
    for k in (0..m).rev() {
        fact_ratio[k] = &fact_ratio[k + 1] * BigInt::from(k + 1);
    }
    let mut b_pow = vec![BigInt::one(); m + 1];
    for k in 1..=m {
        b_pow[k] = &b_pow[k - 1] * b;
    }
    let mut sum = BigInt::zero();
    for k in 1..=m {
        // ∏_{i=0}^{k-2} (k b - i a), the numerator of Γ(k/q+1)/Γ(k/q-k+2) times a^{k-1}
        let kb = BigInt::from(k) * b;
        let mut prod = BigInt::one();
        for i in 0..k.saturating_sub(1) {
            prod *= &kb - BigInt::from(i) * a;
        }
        let term = binom(k) * prod * a * &b_pow[m - k] * &fact_ratio[k];
        if k % 2 == 1 {
            sum += term;
        } else {
            sum -= term;
        }
    }
    BigRational::new(sum, &b_pow[m] * &fact_ratio[0])
}

fn binomial_row(n: usize) -> Vec<BigInt> {
    let mut row = vec![BigInt::one(); n + 1];
    for k in 1..=n {
        row[k] = &row[k - 1] * BigInt::from(n - k + 1) / BigInt::from(k);
    }
    row
}

/// α(n) = P(#edges = n) in exact rational arithmetic.
pub fn size_pmf_exact(q: &BigRational, n: usize) -> Result<BigRational, AnalyticsError> {
    let (a, b) = check_rational_q(q)?;
    if n == 0 {
        return Ok(BigRational::zero());
    }
    let row = binomial_row(n - 1);
    Ok(alternating_exact(&a, &b, n, |k| row[k - 1].clone()))
}

/// 𝒜(x) = P(#edges ≤ x) in exact rational arithmetic.
pub fn size_cdf_exact(q: &BigRational, x: f64) -> Result<BigRational, AnalyticsError> {
    let (a, b) = check_rational_q(q)?;
    if !(x >= 1.0) {
        return Ok(BigRational::zero());
    }
    let m = x.floor() as usize;
    let row = binomial_row(m);
    Ok(alternating_exact(&a, &b, m, |k| row[k].clone()))
}

/// Float evaluation of α(n) in extended precision, guarded.
pub fn size_pmf(q: f64, n: usize, policy: &SeriesEvalPolicy) -> Result<f64, AnalyticsError> {
    check_q(q)?;
    // no vertex has one child, and at q = 1/2 none has more than two
    if n == 0 || n == 2 || (q == 0.5 && n % 2 == 0) {
        return Ok(0.0);
    }
    alternating_float(q, n, n - 1, |k| k - 1, policy)
}

/// Float evaluation of 𝒜(x) in extended precision, guarded.
pub fn size_cdf(q: f64, x: f64, policy: &SeriesEvalPolicy) -> Result<f64, AnalyticsError> {
    check_q(q)?;
    if !(x >= 1.0) {
        return Ok(0.0);
    }
    let m = x.floor() as usize;
    alternating_float(q, m, m, |k| k, policy)
}

fn alternating_float(
    q: f64,
    m: usize,
    row_n: usize,
    row_k: impl Fn(usize) -> usize,
    policy: &SeriesEvalPolicy,
) -> Result<f64, AnalyticsError> {
    // term magnitudes in log2 to size the precision
    let ln_binom = |n: usize, k: usize| {
        statrs::function::factorial::ln_binomial(n as u64, k as u64) / std::f64::consts::LN_2
    };
    let mut max_term = f64::NEG_INFINITY;
    for k in 1..=m {
        let kf = k as f64;
        let l = (statrs::function::gamma::ln_gamma(kf / q + 1.0)
            - statrs::function::gamma::ln_gamma(kf / q - kf + 2.0)
            - statrs::function::gamma::ln_gamma(kf + 1.0)
            + kf * q.ln())
            / std::f64::consts::LN_2
            + ln_binom(row_n, row_k(k));
        max_term = max_term.max(l);
    }
    let bits = policy.bits_for(max_term, -40.0);
    let qb = big(q, bits);
    let mut sum = big_int(0, bits);
    let mut binom = big_int(1, bits);
    let mut qk = big_int(1, bits);
    let mut fact = big_int(1, bits);
    let mut cur_k = 0usize;
    for k in 1..=m {
        qk = qk * qb.clone();
        fact = fact * big_int(k as u64, bits);
        // advance C(row_n, j) to j = row_k(k)
        let target = row_k(k);
        while cur_k < target {
            binom = binom * big_int((row_n - cur_k) as u64, bits) / big_int(cur_k as u64 + 1, bits);
            cur_k += 1;
        }
        let kq = big_int(k as u64, bits) / qb.clone();
        let mut prod = big_int(1, bits);
        for i in 0..k.saturating_sub(1) {
            prod = prod * (kq.clone() - big_int(i as u64, bits));
        }
        let term = binom.clone() * prod * qk.clone() / fact.clone();
        sum = if k % 2 == 1 { sum + term } else { sum - term };
    }
    let v = to_f64(&sum);
    policy.check(max_term, v, bits)?;
    Ok(v)
}

/// Asymptotic tail 1 - 𝒜(x) ~ x^{-q} / (q^q Γ(1-q)).
pub fn size_tail(q: f64, x: f64) -> f64 {
    x.powf(-q) / (q.powf(q) * gamma(1.0 - q))
}

/// IGW(q) probabilities q_0..=q_kmax for rational q.
pub fn igw_pmf_rational(q: &BigRational, kmax: usize) -> Result<Vec<BigRational>, AnalyticsError> {
    check_rational_q(q)?;
    let one = BigRational::one();
    let mut v = vec![BigRational::zero(); kmax + 1];
    v[0] = q.clone();
    if kmax >= 2 {
        v[2] = (&one - q) / (BigRational::from_integer(2.into()) * q);
    }
    let inv = one.clone() / q;
    for k in 3..=kmax {
        let j = BigRational::from_integer(BigInt::from(k - 1));
        v[k] = &v[k - 1] * (&j - &inv) / (&j + &one);
    }
    Ok(v)
}

/// Edge-count law from the recursion α(n+1) = Σ_k q_k P(S_k = n), where
/// S_k is the total size of k independent planted subtrees. Index n of the
/// result is α(n); index 0 is zero.
fn size_recursion<T>(pmf: &[T], n_max: usize) -> Vec<T>
where
    T: Clone + Zero + One + for<'a> Add<&'a T, Output = T> + for<'a> Mul<&'a T, Output = T>,
{
    let mut alpha = vec![T::zero(); n_max + 1];
    if n_max == 0 {
        return alpha;
    }
    alpha[1] = pmf.first().cloned().unwrap_or_else(T::zero);
    // conv[k][n] = P(S_k = n); S_k ≥ k
    let kmax = pmf.len().saturating_sub(1).min(n_max);
    let mut conv: Vec<Vec<T>> = vec![vec![T::zero(); n_max + 1]; kmax + 1];
    conv[0][0] = T::one();
    for n in 1..n_max {
        for k in 1..=kmax.min(n) {
            let mut s = T::zero();
            for j in 1..=n - k + 1 {
                s = s + &(alpha[j].clone() * &conv[k - 1][n - j]);
            }
            conv[k][n] = s;
        }
        let mut next = T::zero();
        for k in 2..=kmax.min(n) {
            next = next + &(pmf[k].clone() * &conv[k][n]);
        }
        alpha[n + 1] = next;
    }
    alpha
}

/// Exact edge-count law of a GW tree with a rational offspring pmf.
pub fn size_pmf_oracle_exact(pmf: &[BigRational], n_max: usize) -> Vec<BigRational> {
    size_recursion(pmf, n_max)
}

/// Edge-count law of a GW tree for any offspring law, in f64.
pub fn size_pmf_oracle(d: &OffspringDistribution, n_max: usize) -> Vec<f64> {
    size_recursion(&d.pmf_vec(n_max + 1), n_max)
}

/// Nearest f64, also for ratios of integers beyond the f64 range.
pub fn rational_to_f64(x: &BigRational) -> f64 {
    x.to_f64().unwrap_or_else(|| {
        let s = if x.is_negative() { -1.0 } else { 1.0 };
        s * (x.numer().abs().bits() as f64 - x.denom().bits() as f64).exp2()
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rat(a: i64, b: i64) -> BigRational {
        BigRational::new(a.into(), b.into())
    }

    #[test]
    fn spot_values() {
        let h = rat(1, 2);
        assert_eq!(size_pmf_exact(&h, 1).unwrap(), rat(1, 2));
        assert_eq!(size_pmf_exact(&h, 2).unwrap(), rat(0, 1));
        assert_eq!(size_pmf_exact(&h, 3).unwrap(), rat(1, 8));
        assert_eq!(size_pmf_exact(&rat(2, 3), 1).unwrap(), rat(2, 3));
        assert!(size_pmf_exact(&rat(1, 3), 1).is_err());
    }

    #[test]
    fn closed_form_equals_recursion() {
        for q in [rat(1, 2), rat(2, 3), rat(3, 4)] {
            let pmf = igw_pmf_rational(&q, 31).unwrap();
            let oracle = size_pmf_oracle_exact(&pmf, 30);
            for n in 1..=30 {
                assert_eq!(size_pmf_exact(&q, n).unwrap(), oracle[n], "q={q} n={n}");
            }
        }
    }

    #[test]
    fn cdf_is_partial_sum() {
        let q = rat(2, 3);
        let mut acc = BigRational::zero();
        for n in 1..=25 {
            acc += size_pmf_exact(&q, n).unwrap();
            assert_eq!(size_cdf_exact(&q, n as f64 + 0.5).unwrap(), acc);
        }
    }

    #[test]
    fn float_mode_matches_exact() {
        let p = SeriesEvalPolicy::default();
        for n in [1usize, 3, 10, 40, 120] {
            let e = rational_to_f64(&size_pmf_exact(&rat(2, 3), n).unwrap());
            let f = size_pmf(2.0 / 3.0, n, &p).unwrap();
            assert!((e - f).abs() < 1e-12 * e.abs().max(1e-300), "n={n}: {e} vs {f}");
        }
        let e = rational_to_f64(&size_cdf_exact(&rat(1, 2), 200.0).unwrap());
        assert!((size_cdf(0.5, 200.0, &p).unwrap() - e).abs() < 1e-13);
        assert!(matches!(size_pmf(0.5, 401, &SeriesEvalPolicy::fixed(53)), Err(AnalyticsError::CancellationGuard { .. })));
    }

    #[test]
    fn float_oracle_matches_igw() {
        let d = OffspringDistribution::igw(2.0 / 3.0).unwrap();
        let o = size_pmf_oracle(&d, 30);
        let p = SeriesEvalPolicy::default();
        for n in 1..=30 {
            assert!((o[n] - size_pmf(2.0 / 3.0, n, &p).unwrap()).abs() < 1e-12);
        }
        let point = OffspringDistribution::table(vec![1.0]).unwrap();
        let o = size_pmf_oracle(&point, 10);
        assert_eq!(o[1], 1.0);
        assert!(o[2..].iter().all(|&x| x == 0.0));
    }

    #[test]
    fn tail_matches_exact_at_thousand() {
        let exact = 1.0 - rational_to_f64(&size_cdf_exact(&rat(1, 2), 1000.0).unwrap());
        let ratio = exact / size_tail(0.5, 1000.0);
        assert!((ratio - 1.0).abs() < 0.1, "{ratio}");
        assert!(size_tail(0.99, 10.0) < size_tail(0.9, 10.0));
    }
}
