use serde::Serialize;
use statrs::distribution::{ContinuousCDF, FisherSnedecor};

use crate::error::StatsError;

/// Fit of `y = intercept + slope * x` by (weighted) least squares.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegressionResult {
    pub intercept: f64,
    pub slope: f64,
    pub intercept_se: f64,
    pub slope_se: f64,
    pub r2: f64,
    pub adj_r2: f64,
    pub f_statistic: f64,
    /// Numerator and denominator degrees of freedom of the F test.
    pub f_df: (usize, usize),
    pub f_p_value: f64,
    pub residuals: Vec<f64>,
    pub weights: Vec<f64>,
}

impl RegressionResult {
    pub fn coefficients(&self) -> [f64; 2] {
        [self.intercept, self.slope]
    }

    pub fn standard_errors(&self) -> [f64; 2] {
        [self.intercept_se, self.slope_se]
    }

    pub fn n(&self) -> usize {
        self.residuals.len()
    }

    pub fn predict(&self, x: f64) -> f64 {
        self.intercept + self.slope * x
    }
}

pub(crate) fn check_finite(values: &[f64]) -> Result<(), StatsError> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(StatsError::NonFinite)
    }
}

/// Minimises `sum w_i (y_i - a - b x_i)^2` in closed form.
pub fn wls_fit(x: &[f64], y: &[f64], weights: &[f64]) -> Result<RegressionResult, StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch(x.len(), y.len()));
    }
    if x.len() != weights.len() {
        return Err(StatsError::LengthMismatch(x.len(), weights.len()));
    }
    let n = x.len();
    if n < 3 {
        return Err(StatsError::TooFew { min: 3, got: n });
    }
    check_finite(x)?;
    check_finite(y)?;
    if weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
        return Err(StatsError::BadWeights);
    }
    let first = x[0];
    if x.iter().all(|v| *v == first) {
        return Err(StatsError::DegeneratePredictor);
    }

    let sw: f64 = weights.iter().sum();
    let xbar = weights.iter().zip(x).map(|(w, x)| w * x).sum::<f64>() / sw;
    let ybar = weights.iter().zip(y).map(|(w, y)| w * y).sum::<f64>() / sw;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for i in 0..n {
        let dx = x[i] - xbar;
        let dy = y[i] - ybar;
        sxx += weights[i] * dx * dx;
        sxy += weights[i] * dx * dy;
        syy += weights[i] * dy * dy;
    }
    if sxx <= 0.0 {
        return Err(StatsError::DegeneratePredictor);
    }
    let slope = sxy / sxx;
    let intercept = ybar - slope * xbar;

    let residuals: Vec<f64> = x
        .iter()
        .zip(y)
        .map(|(x, y)| y - intercept - slope * x)
        .collect();
    let ssr: f64 = residuals
        .iter()
        .zip(weights)
        .map(|(e, w)| w * e * e)
        .sum();
    let df_resid = n - 2;
    let sigma2 = ssr / df_resid as f64;
    let slope_se = (sigma2 / sxx).sqrt();
    let intercept_se = (sigma2 * (1.0 / sw + xbar * xbar / sxx)).sqrt();

    let (r2, f_statistic) = if syy > 0.0 {
        let r2 = (1.0 - ssr / syy).clamp(0.0, 1.0);
        let explained = (syy - ssr).max(0.0);
        let f = if ssr > 0.0 {
            explained / (ssr / df_resid as f64)
        } else {
            f64::INFINITY
        };
        (r2, f)
    } else {
        // constant response: nothing to explain
        (1.0, f64::NAN)
    };
    let adj_r2 = 1.0 - (1.0 - r2) * (n - 1) as f64 / df_resid as f64;
    let f_p_value = if f_statistic.is_infinite() {
        0.0
    } else if f_statistic.is_nan() {
        f64::NAN
    } else {
        FisherSnedecor::new(1.0, df_resid as f64)
            .map(|d| d.sf(f_statistic))
            .unwrap_or(f64::NAN)
    };

    Ok(RegressionResult {
        intercept,
        slope,
        intercept_se,
        slope_se,
        r2,
        adj_r2,
        f_statistic,
        f_df: (1, df_resid),
        f_p_value,
        residuals,
        weights: weights.to_vec(),
    })
}

pub fn ols_fit(x: &[f64], y: &[f64]) -> Result<RegressionResult, StatsError> {
    wls_fit(x, y, &vec![1.0; x.len()])
}

/// Two-stage feasible weights: regress `ln(e^2)` on `x` and weight each
/// observation by the inverse of the fitted variance.
pub fn feasible_weights(x: &[f64], residuals: &[f64]) -> Result<Vec<f64>, StatsError> {
    if x.len() != residuals.len() {
        return Err(StatsError::LengthMismatch(x.len(), residuals.len()));
    }
    check_finite(residuals)?;
    let n = x.len();
    let mean_sq = residuals.iter().map(|e| e * e).sum::<f64>() / n.max(1) as f64;
    let floor = (mean_sq * f64::EPSILON).max(f64::MIN_POSITIVE);
    let log_sq: Vec<f64> = residuals.iter().map(|e| (e * e).max(floor).ln()).collect();
    let first = log_sq.first().copied().unwrap_or(0.0);
    if log_sq.iter().all(|v| *v == first) {
        return Ok(vec![1.0; n]);
    }
    let aux = ols_fit(x, &log_sq)?;
    let w: Vec<f64> = x.iter().map(|xi| (-aux.predict(*xi)).exp()).collect();
    if w.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
        return Err(StatsError::BadWeights);
    }
    Ok(w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn noiseless_line_is_recovered_for_any_weights() {
        let x: Vec<f64> = (0..10).map(f64::from).collect();
        let y: Vec<f64> = x.iter().map(|x| 2.0 + 3.0 * x).collect();
        let w: Vec<f64> = (1..=10).map(|i| f64::from(i) * 0.7).collect();
        let fit = wls_fit(&x, &y, &w).unwrap();
        assert_relative_eq!(fit.intercept, 2.0, epsilon = 1e-12);
        assert_relative_eq!(fit.slope, 3.0, epsilon = 1e-12);
        assert_relative_eq!(fit.adj_r2, 1.0, epsilon = 1e-12);
        assert_eq!(fit.f_p_value, 0.0);
    }

    #[test]
    fn weighted_residuals_sum_to_zero() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let y = [1.2, 1.9, 3.4, 3.9, 5.5, 5.8];
        let w = [1.0, 0.5, 2.0, 1.5, 0.25, 3.0];
        let fit = wls_fit(&x, &y, &w).unwrap();
        let s: f64 = fit.residuals.iter().zip(&w).map(|(e, w)| e * w).sum();
        assert!(s.abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_input() {
        assert_eq!(
            ols_fit(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]).unwrap_err(),
            StatsError::DegeneratePredictor
        );
        assert_eq!(
            ols_fit(&[1.0, 2.0], &[1.0, 2.0]).unwrap_err(),
            StatsError::TooFew { min: 3, got: 2 }
        );
        assert_eq!(
            ols_fit(&[1.0, 2.0, 3.0], &[1.0, 2.0]).unwrap_err(),
            StatsError::LengthMismatch(3, 2)
        );
        assert_eq!(
            wls_fit(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0], &[1.0, 0.0, 1.0]).unwrap_err(),
            StatsError::BadWeights
        );
    }

    #[test]
    fn equal_residuals_give_constant_weights() {
        let x = [0.0, 1.0, 2.0, 3.0, 4.0];
        let w = feasible_weights(&x, &[0.3, -0.3, 0.3, -0.3, 0.3]).unwrap();
        assert!(w.iter().all(|v| *v == w[0]));
        let w = feasible_weights(&x, &[0.0; 5]).unwrap();
        assert!(w.iter().all(|v| *v == w[0]));
    }
}
