use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

use super::regression::{check_finite, ols_fit};
use super::shapiro::shapiro_wilk;
use crate::error::StatsError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TestResult {
    pub statistic: f64,
    pub p_value: f64,
}

/// Normality, heteroscedasticity and autocorrelation checks on the
/// residuals of a simple regression.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DiagnosticReport {
    pub shapiro_wilk: TestResult,
    pub breusch_pagan: TestResult,
    pub durbin_watson: TestResult,
}

pub fn diagnose(x: &[f64], residuals: &[f64]) -> Result<DiagnosticReport, StatsError> {
    let (w, pw) = shapiro_wilk(residuals)?;
    let (bp, pbp) = breusch_pagan_studentized(x, residuals)?;
    let (d, pd) = durbin_watson_regression(x, residuals)?;
    Ok(DiagnosticReport {
        shapiro_wilk: TestResult {
            statistic: w,
            p_value: pw,
        },
        breusch_pagan: TestResult {
            statistic: bp,
            p_value: pbp,
        },
        durbin_watson: TestResult {
            statistic: d,
            p_value: pd,
        },
    })
}

fn dw_statistic(residuals: &[f64]) -> Result<f64, StatsError> {
    if residuals.len() < 2 {
        return Err(StatsError::TooFew {
            min: 2,
            got: residuals.len(),
        });
    }
    check_finite(residuals)?;
    let ss: f64 = residuals.iter().map(|e| e * e).sum();
    if ss == 0.0 {
        return Err(StatsError::ZeroResiduals);
    }
    let num: f64 = residuals.windows(2).map(|w| (w[1] - w[0]).powi(2)).sum();
    Ok((num / ss).clamp(0.0, 4.0))
}

/// Durbin-Watson statistic with a normal-approximation p-value for the
/// alternative of positive autocorrelation. The null moments are those of
/// residuals from a mean-only model.
pub fn durbin_watson(residuals: &[f64]) -> Result<(f64, f64), StatsError> {
    let d = dw_statistic(residuals)?;
    let ones = vec![1.0; residuals.len()];
    Ok((d, dw_p_value(d, &[ones])))
}

/// As [`durbin_watson`], with null moments computed for the design
/// `[1, x]` the residuals came from.
pub fn durbin_watson_regression(x: &[f64], residuals: &[f64]) -> Result<(f64, f64), StatsError> {
    if x.len() != residuals.len() {
        return Err(StatsError::LengthMismatch(x.len(), residuals.len()));
    }
    let d = dw_statistic(residuals)?;
    if residuals.len() < 4 {
        return Ok((d, f64::NAN));
    }
    let ones = vec![1.0; x.len()];
    Ok((d, dw_p_value(d, &[ones, x.to_vec()])))
}

/// Multiplies by the tridiagonal matrix whose quadratic form is the DW
/// numerator.
fn apply_dw_matrix(v: &[f64]) -> Vec<f64> {
    let n = v.len();
    (0..n)
        .map(|i| {
            let diag = if i == 0 || i == n - 1 { 1.0 } else { 2.0 };
            let mut s = diag * v[i];
            if i > 0 {
                s -= v[i - 1];
            }
            if i + 1 < n {
                s -= v[i + 1];
            }
            s
        })
        .collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(a, b)| a * b).sum()
}

fn invert_small(m: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    match m.len() {
        1 => (m[0][0] != 0.0).then(|| vec![vec![1.0 / m[0][0]]]),
        2 => {
            let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
            (det != 0.0).then(|| {
                vec![
                    vec![m[1][1] / det, -m[0][1] / det],
                    vec![-m[1][0] / det, m[0][0] / det],
                ]
            })
        }
        _ => None,
    }
}

fn mat_mul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let k = a.len();
    (0..k)
        .map(|i| (0..k).map(|j| (0..k).map(|l| a[i][l] * b[l][j]).sum()).collect())
        .collect()
}

fn trace(a: &[Vec<f64>]) -> f64 {
    (0..a.len()).map(|i| a[i][i]).sum()
}

fn dw_p_value(d: f64, columns: &[Vec<f64>]) -> f64 {
    let n = columns[0].len();
    let k = columns.len();
    if n <= k + 1 {
        return f64::NAN;
    }
    let ax: Vec<Vec<f64>> = columns.iter().map(|c| apply_dw_matrix(c)).collect();
    let gram: Vec<Vec<f64>> = columns
        .iter()
        .map(|a| columns.iter().map(|b| dot(a, b)).collect())
        .collect();
    let Some(g) = invert_small(&gram) else {
        return f64::NAN;
    };
    let xax: Vec<Vec<f64>> = columns
        .iter()
        .map(|a| ax.iter().map(|b| dot(a, b)).collect())
        .collect();
    let xa2x: Vec<Vec<f64>> = ax
        .iter()
        .map(|a| ax.iter().map(|b| dot(a, b)).collect())
        .collect();
    let gxax = mat_mul(&g, &xax);
    let nf = n as f64;
    let tr_a = 2.0 * (nf - 1.0);
    let tr_a2 = 6.0 * nf - 8.0;
    let p = tr_a - trace(&gxax);
    let q = tr_a2 - 2.0 * trace(&mat_mul(&g, &xa2x)) + trace(&mat_mul(&gxax, &gxax));
    let dof = (n - k) as f64;
    let mean = p / dof;
    let var = 2.0 * (dof * q - p * p) / (dof * dof * (dof + 2.0));
    if !(var > 0.0) {
        return f64::NAN;
    }
    Normal::new(mean, var.sqrt())
        .map(|nd| nd.cdf(d))
        .unwrap_or(f64::NAN)
}

/// Koenker's studentized Breusch-Pagan test: `n * R^2` of the squared
/// residuals regressed on `x`, referred to chi-square with 1 df.
pub fn breusch_pagan_studentized(x: &[f64], residuals: &[f64]) -> Result<(f64, f64), StatsError> {
    if x.len() != residuals.len() {
        return Err(StatsError::LengthMismatch(x.len(), residuals.len()));
    }
    let sq: Vec<f64> = residuals.iter().map(|e| e * e).collect();
    let n = sq.len();
    let first = sq.first().copied().unwrap_or(0.0);
    let fit = ols_fit(x, &sq)?;
    if sq.iter().all(|v| *v == first) {
        return Ok((0.0, 1.0));
    }
    let stat = n as f64 * fit.r2;
    let p = ChiSquared::new(1.0)
        .map(|c| c.sf(stat))
        .unwrap_or(f64::NAN);
    Ok((stat, p))
}
