//! Simple-regression machinery and residual diagnostics.
//!
//! Everything here works on a single predictor with an intercept; natural
//! logarithms are used wherever a log transform appears.

mod diagnostics;
mod regression;
mod shapiro;
mod trend;

pub use diagnostics::{
    breusch_pagan_studentized, diagnose, durbin_watson, durbin_watson_regression,
    DiagnosticReport, TestResult,
};
pub use regression::{feasible_weights, ols_fit, wls_fit, RegressionResult};
pub use shapiro::shapiro_wilk;
pub use trend::{exp_trend, fractional_year, TrendFit, Weighting};

/// Linear-interpolation quantile (the default "type 7" definition).
/// `sorted` must be sorted ascending and non-empty.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let h = (sorted.len() - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    Some(quantile_sorted(&v, 0.5))
}

pub fn mean(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        None
    } else {
        Some(values.iter().sum::<f64>() / values.len() as f64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantiles_interpolate() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile_sorted(&v, 0.0), 1.0);
        assert_eq!(quantile_sorted(&v, 1.0), 4.0);
        assert_eq!(quantile_sorted(&v, 0.5), 2.5);
        assert_eq!(quantile_sorted(&v, 0.25), 1.75);
        assert_eq!(median(&[3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(&[]), None);
    }
}
