//! Closed-form laws of IGW trees, generating-function transforms and their
//! independent numerical oracles.

mod attractor;
mod coloring;
mod height;
mod lagrange;
mod length;
mod pushforward;
mod size;

use dashu_float::round::mode::HalfEven;
use dashu_float::FBig;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::offspring::OffspringError;

pub use attractor::{attractor_limit, attractor_target};
pub use coloring::{coloring_offspring, coloring_q, coloring_survival, ColoringVariant};
pub use height::{height_cdf, height_pdf, height_survival_pt};
pub use lagrange::{lagrange_round_trip_residual, lagrange_w_coeffs, lagrange_w_coeffs_exact, lagrange_w_eval};
pub use length::{
    bessel_i0_i1, length_cdf, length_cdf_bessel, length_pdf, length_pdf_bessel, length_tail, LengthSeries,
    LengthTable,
};
pub use pushforward::{pushforward_mean, pushforward_offspring, pushforward_q, PushforwardLaw};
pub use size::{
    igw_pmf_rational, rational_to_f64, size_cdf, size_cdf_exact, size_pmf, size_pmf_exact, size_pmf_oracle, size_pmf_oracle_exact,
    size_tail,
};

pub(crate) type Big = FBig<HalfEven>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalyticsError {
    #[error("parameter outside domain: {0}")]
    Domain(String),
    /// The largest term exceeds the sum by more than the working precision allows.
    #[error("cancellation guard violated: max term 2^{max_term_log2:.1}, sum 2^{sum_log2:.1}, precision {precision} bits")]
    CancellationGuard { max_term_log2: f64, sum_log2: f64, precision: usize },
    #[error("series did not converge within {0} terms")]
    MaxTerms(usize),
    #[error("normalization defect {0:e} exceeds tolerance")]
    Normalization(f64),
    #[error(transparent)]
    Offspring(#[from] OffspringError),
}

/// Working precision for alternating series.
///
/// With `precision_bits` unset the precision is chosen per evaluation as
/// log2(max term / sum estimate) + `extra_bits`, never below 53.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesEvalPolicy {
    pub precision_bits: Option<usize>,
    pub extra_bits: usize,
    pub max_terms: usize,
    /// Evaluation fails when max|term| / |sum| exceeds 2^(precision - guard_bits).
    pub guard_bits: usize,
}

impl Default for SeriesEvalPolicy {
    fn default() -> Self {
        Self { precision_bits: None, extra_bits: 64, max_terms: 20_000, guard_bits: 20 }
    }
}

impl SeriesEvalPolicy {
    pub fn fixed(bits: usize) -> Self {
        Self { precision_bits: Some(bits.max(53)), ..Self::default() }
    }

    /// Precision for a series whose largest term is 2^`max_term_log2` and
    /// whose value is expected near 2^`sum_log2`.
    pub fn bits_for(&self, max_term_log2: f64, sum_log2: f64) -> usize {
        match self.precision_bits {
            Some(b) => b,
            None => (((max_term_log2 - sum_log2).max(0.0)).ceil() as usize + self.extra_bits).max(53),
        }
    }

    pub fn check(&self, max_term_log2: f64, sum: f64, precision: usize) -> Result<(), AnalyticsError> {
        let sum_log2 = sum.abs().log2();
        if max_term_log2 - sum_log2 > (precision as f64 - self.guard_bits as f64) {
            return Err(AnalyticsError::CancellationGuard { max_term_log2, sum_log2, precision });
        }
        Ok(())
    }
}

pub(crate) fn big(x: f64, bits: usize) -> Big {
    Big::try_from(x).expect("finite").with_precision(bits).value()
}

pub(crate) fn big_int(n: u64, bits: usize) -> Big {
    Big::from(n).with_precision(bits).value()
}

pub(crate) fn to_f64(x: &Big) -> f64 {
    x.to_f64().value()
}

pub(crate) fn check_q(q: f64) -> Result<(), AnalyticsError> {
    if (0.5..1.0).contains(&q) {
        Ok(())
    } else {
        Err(AnalyticsError::Domain(format!("q={q} outside [1/2, 1)")))
    }
}

pub(crate) fn check_lambda(lambda: f64) -> Result<(), AnalyticsError> {
    if lambda > 0.0 && lambda.is_finite() {
        Ok(())
    } else {
        Err(AnalyticsError::Domain(format!("lambda={lambda} must be positive")))
    }
}
