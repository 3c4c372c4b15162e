use statrs::function::gamma::{gamma, ln_gamma};

use super::{big, big_int, check_lambda, check_q, to_f64, AnalyticsError, Big, SeriesEvalPolicy};

/// Smallest sum magnitude, as a power of two, the precision budget assumes.
const SUM_FLOOR_LOG2: f64 = -30.0;

/// Coefficients a_n = (-1)^{n-1} Γ(n/q+1) / (n! (n-1)! Γ(n/q-n+2)) of the
/// length density ℓ(x) = λq Σ a_n y^{n-1}, y = λqx, held in extended
/// precision for all y up to `y_max`.
#[derive(Debug, Clone)]
pub struct LengthSeries {
    q: f64,
    y_max: f64,
    bits: usize,
    policy: SeriesEvalPolicy,
    coeffs: Vec<Big>,
    /// a_n / n, the CDF coefficients.
    cdf_coeffs: Vec<Big>,
    coeffs_f64: Vec<f64>,
    log2_abs: Vec<f64>,
}

/// log2 |a_n|.
fn log2_coeff(q: f64, n: usize) -> f64 {
    let nf = n as f64;
    let ln = ln_gamma(nf / q + 1.0) - ln_gamma(nf / q - nf + 2.0) - ln_gamma(nf + 1.0) - ln_gamma(nf);
    ln / std::f64::consts::LN_2
}

impl LengthSeries {
    pub fn new(q: f64, y_max: f64, policy: SeriesEvalPolicy) -> Result<Self, AnalyticsError> {
        check_q(q)?;
        if !(y_max >= 0.0 && y_max.is_finite()) {
            return Err(AnalyticsError::Domain(format!("y_max={y_max}")));
        }
        let ly = y_max.max(1.0).log2();
        let mut log2_abs = Vec::new();
        let mut max_term = f64::NEG_INFINITY;
        let mut n = 1usize;
        // extend until the terms at y_max fall far below the working floor
        loop {
            let l = log2_coeff(q, n);
            let term = l + n as f64 * ly;
            log2_abs.push(l);
            max_term = max_term.max(term);
            let floor = SUM_FLOOR_LOG2 - policy.extra_bits as f64 - 10.0;
            if n > 2 && term < floor && term < max_term {
                break;
            }
            n += 1;
            if n > policy.max_terms {
                return Err(AnalyticsError::MaxTerms(policy.max_terms));
            }
        }
        let bits = policy.bits_for(max_term, SUM_FLOOR_LOG2);
        let nmax = log2_abs.len();
        let qb = big(q, bits);
        let mut coeffs = Vec::with_capacity(nmax);
        let mut cdf_coeffs = Vec::with_capacity(nmax);
        let mut fact_n = big_int(1, bits);
        let mut fact_nm1 = big_int(1, bits);
        for n in 1..=nmax {
            if n > 1 {
                fact_nm1 = fact_n.clone();
            }
            fact_n = fact_n * big_int(n as u64, bits);
            let n_over_q = big_int(n as u64, bits) / qb.clone();
            let mut r = big_int(1, bits);
            for i in 0..n.saturating_sub(1) {
                r = r * (n_over_q.clone() - big_int(i as u64, bits));
            }
            let mut a = r / (fact_n.clone() * fact_nm1.clone());
            if n % 2 == 0 {
                a = -a;
            }
            cdf_coeffs.push(a.clone() / big_int(n as u64, bits));
            coeffs.push(a);
        }
        let coeffs_f64 = coeffs.iter().map(to_f64).collect();
        Ok(Self { q, y_max, bits, policy, coeffs, cdf_coeffs, coeffs_f64, log2_abs })
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn y_max(&self) -> f64 {
        self.y_max
    }

    pub fn precision_bits(&self) -> usize {
        self.bits
    }

    pub fn terms(&self) -> usize {
        self.coeffs.len()
    }

    pub fn coefficients_f64(&self) -> &[f64] {
        &self.coeffs_f64
    }

    fn check_y(&self, y: f64) -> Result<(), AnalyticsError> {
        if !(y >= 0.0) || y > self.y_max * (1.0 + 1e-12) {
            return Err(AnalyticsError::Domain(format!("y={y} outside [0, {}]", self.y_max)));
        }
        Ok(())
    }

    /// Σ c_n y^{n + shift} by Horner, in f64 when y ≤ 1.
    fn sum(&self, coeffs: &[Big], y: f64, shift: i32) -> Result<f64, AnalyticsError> {
        let max_term = self
            .log2_abs
            .iter()
            .enumerate()
            .map(|(i, l)| l + (i as f64 + 1.0 + shift as f64) * y.log2())
            .fold(f64::NEG_INFINITY, f64::max);
        let value = if y <= 1.0 {
            let mut acc = 0.0;
            for c in coeffs.iter().rev() {
                acc = acc * y + to_f64(c);
            }
            acc
        } else {
            let yb = big(y, self.bits);
            let mut acc = big_int(0, self.bits);
            for c in coeffs.iter().rev() {
                acc = acc * yb.clone() + c.clone();
            }
            to_f64(&acc)
        };
        let value = if shift == 1 { value * y } else { value };
        if y > 1.0 {
            self.policy.check(max_term, value, self.bits)?;
        }
        Ok(value)
    }

    /// ℓ(x) with y = λqx.
    pub fn pdf(&self, lambda: f64, x: f64) -> Result<f64, AnalyticsError> {
        let y = lambda * self.q * x;
        self.check_y(y)?;
        Ok(lambda * self.q * self.sum(&self.coeffs, y, 0)?)
    }

    /// L(x) = P(length ≤ x).
    pub fn cdf(&self, lambda: f64, x: f64) -> Result<f64, AnalyticsError> {
        let y = lambda * self.q * x;
        self.check_y(y)?;
        if y == 0.0 {
            return Ok(0.0);
        }
        self.sum(&self.cdf_coeffs, y, 1)
    }
}

pub fn length_pdf(q: f64, lambda: f64, x: f64, policy: &SeriesEvalPolicy) -> Result<f64, AnalyticsError> {
    check_lambda(lambda)?;
    domain_x(x)?;
    LengthSeries::new(q, lambda * q * x, *policy)?.pdf(lambda, x)
}

pub fn length_cdf(q: f64, lambda: f64, x: f64, policy: &SeriesEvalPolicy) -> Result<f64, AnalyticsError> {
    check_lambda(lambda)?;
    domain_x(x)?;
    LengthSeries::new(q, lambda * q * x, *policy)?.cdf(lambda, x)
}

fn domain_x(x: f64) -> Result<(), AnalyticsError> {
    if x >= 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(AnalyticsError::Domain(format!("x={x} must be nonnegative")))
    }
}

/// Asymptotic tail 1 - L(x) ~ x^{-q} / ((λq)^q Γ(1-q)).
pub fn length_tail(q: f64, lambda: f64, x: f64) -> f64 {
    x.powf(-q) / ((lambda * q).powf(q) * gamma(1.0 - q))
}

/// (I_0(y), I_1(y)) by their power series, summed in extended precision.
pub fn bessel_i0_i1(y: f64, policy: &SeriesEvalPolicy) -> (f64, f64) {
    let bits = policy.precision_bits.unwrap_or(53 + policy.extra_bits);
    let h = big(y / 2.0, bits);
    let h2 = h.clone() * h.clone();
    let mut t = big_int(1, bits);
    let mut i0 = t.clone();
    let mut i1 = h.clone();
    let eps = 2f64.powi(-(bits as i32));
    for k in 1..policy.max_terms {
        let kb = big_int(k as u64, bits);
        t = t * h2.clone() / (kb.clone() * kb);
        let s = t.clone() * h.clone() / big_int(k as u64 + 1, bits);
        i0 = i0 + t.clone();
        i1 = i1 + s;
        if to_f64(&t) < eps * to_f64(&i0) && k as f64 > y {
            break;
        }
    }
    (to_f64(&i0), to_f64(&i1))
}

/// ℓ(x) = e^{-λx} I_1(λx)/x for q = 1/2.
pub fn length_pdf_bessel(lambda: f64, x: f64, policy: &SeriesEvalPolicy) -> f64 {
    if x == 0.0 {
        return lambda / 2.0;
    }
    let y = lambda * x;
    let (_, i1) = bessel_i0_i1(y, policy);
    (-y).exp() * i1 / x
}

/// L(x) = 1 - e^{-λx}(I_0(λx) + I_1(λx)) for q = 1/2.
pub fn length_cdf_bessel(lambda: f64, x: f64, policy: &SeriesEvalPolicy) -> f64 {
    1.0 - length_survival_bessel(lambda, x, policy)
}

pub(crate) fn length_survival_bessel(lambda: f64, x: f64, policy: &SeriesEvalPolicy) -> f64 {
    let y = lambda * x;
    let (i0, i1) = bessel_i0_i1(y, policy);
    (-y).exp() * (i0 + i1)
}

/// L and ℓ tabulated on a uniform grid, with cubic Hermite interpolation
/// between nodes.
#[derive(Debug, Clone)]
pub struct LengthTable {
    step: f64,
    cdf: Vec<f64>,
    pdf: Vec<f64>,
}

impl LengthTable {
    pub fn new(q: f64, lambda: f64, x_max: f64, points: usize, policy: &SeriesEvalPolicy) -> Result<Self, AnalyticsError> {
        check_lambda(lambda)?;
        let series = LengthSeries::new(q, lambda * q * x_max, *policy)?;
        let step = x_max / points as f64;
        let mut cdf = Vec::with_capacity(points + 1);
        let mut pdf = Vec::with_capacity(points + 1);
        for i in 0..=points {
            let x = (i as f64 * step).min(x_max);
            cdf.push(series.cdf(lambda, x)?);
            pdf.push(series.pdf(lambda, x)?);
        }
        Ok(Self { step, cdf, pdf })
    }

    pub fn x_max(&self) -> f64 {
        self.step * (self.cdf.len() - 1) as f64
    }

    /// Interpolated L(x) for 0 ≤ x ≤ x_max.
    pub fn cdf(&self, x: f64) -> Option<f64> {
        if !(x >= 0.0) || x > self.x_max() {
            return None;
        }
        let s = x / self.step;
        let i = (s.floor() as usize).min(self.cdf.len() - 2);
        let u = s - i as f64;
        let (f0, f1) = (self.cdf[i], self.cdf[i + 1]);
        let (d0, d1) = (self.pdf[i] * self.step, self.pdf[i + 1] * self.step);
        let u2 = u * u;
        let u3 = u2 * u;
        Some(
            (2.0 * u3 - 3.0 * u2 + 1.0) * f0
                + (u3 - 2.0 * u2 + u) * d0
                + (-2.0 * u3 + 3.0 * u2) * f1
                + (u3 - u2) * d1,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn density_at_zero() {
        let p = SeriesEvalPolicy::default();
        for &(q, l) in &[(0.5, 1.0), (2.0 / 3.0, 2.0), (0.9, 0.3)] {
            assert!((length_pdf(q, l, 0.0, &p).unwrap() - l * q).abs() < 1e-15);
            assert_eq!(length_cdf(q, l, 0.0, &p).unwrap(), 0.0);
        }
    }

    #[test]
    fn bessel_forms_agree() {
        let p = SeriesEvalPolicy::default();
        for &x in &[0.5, 1.0, 2.0, 7.0, 30.0] {
            let a = length_pdf(0.5, 1.0, x, &p).unwrap();
            let b = length_pdf_bessel(1.0, x, &p);
            assert!((a - b).abs() < 1e-12, "pdf at {x}: {a} vs {b}");
            let a = length_cdf(0.5, 1.0, x, &p).unwrap();
            let b = length_cdf_bessel(1.0, x, &p);
            assert!((a - b).abs() < 1e-12, "cdf at {x}: {a} vs {b}");
        }
    }

    #[test]
    fn bessel_reference_values() {
        let (i0, i1) = bessel_i0_i1(1.0, &SeriesEvalPolicy::default());
        assert!((i0 - 1.2660658777520082).abs() < 1e-15);
        assert!((i1 - 0.5651591039924851).abs() < 1e-15);
    }

    #[test]
    fn cdf_monotone_and_matches_quadrature() {
        let p = SeriesEvalPolicy::default();
        for &q in &[0.5, 2.0 / 3.0, 0.9] {
            let s = LengthSeries::new(q, 5.0, p).unwrap();
            let xmax = 5.0 / q;
            let mut prev = 0.0;
            let n = 2000;
            let h = xmax / n as f64;
            let mut integral = 0.0;
            for i in 1..=n {
                let x = i as f64 * h;
                let c = s.cdf(1.0, x).unwrap();
                assert!(c >= prev);
                prev = c;
                // Simpson on each subinterval
                let (a, m, b) = (s.pdf(1.0, x - h).unwrap(), s.pdf(1.0, x - h / 2.0).unwrap(), s.pdf(1.0, x).unwrap());
                integral += h / 6.0 * (a + 4.0 * m + b);
                if i % 400 == 0 {
                    assert!((integral - c).abs() < 1e-6, "q={q} x={x}");
                }
            }
        }
    }

    #[test]
    fn guard_trips_at_low_precision() {
        let r = length_cdf(2.0 / 3.0, 1.0, 60.0, &SeriesEvalPolicy::fixed(53));
        assert!(matches!(r, Err(AnalyticsError::CancellationGuard { .. })));
    }

    #[test]
    fn table_interpolation() {
        let p = SeriesEvalPolicy::default();
        let t = LengthTable::new(2.0 / 3.0, 1.0, 30.0, 600, &p).unwrap();
        let s = LengthSeries::new(2.0 / 3.0, 20.0, p).unwrap();
        for &x in &[0.013, 0.7, 3.3, 11.1, 29.9] {
            assert!((t.cdf(x).unwrap() - s.cdf(1.0, x).unwrap()).abs() < 1e-7);
        }
        assert!(t.cdf(31.0).is_none());
    }

    #[test]
    fn tail_constant() {
        let x: f64 = 7.0;
        let expect = (2.0 / std::f64::consts::PI).sqrt() / x.sqrt();
        assert!((length_tail(0.5, 1.0, x) - expect).abs() < 1e-14);
    }
}
