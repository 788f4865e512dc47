use std::fmt;
use std::str::FromStr;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};

use super::regression::{feasible_weights, ols_fit, wls_fit, RegressionResult};
use crate::error::StatsError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    Ols,
    #[default]
    FeasibleWls,
}

impl fmt::Display for Weighting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Weighting::Ols => "ols",
            Weighting::FeasibleWls => "feasible_wls",
        })
    }
}

impl FromStr for Weighting {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ols" => Ok(Weighting::Ols),
            "wls" | "feasible_wls" => Ok(Weighting::FeasibleWls),
            other => Err(format!("unknown weighting `{other}`")),
        }
    }
}

/// Log-linear trend `ln(value) = intercept + slope * year`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrendFit {
    pub slope_per_year: f64,
    pub intercept: f64,
    pub growth_factor: f64,
    pub cagr_percent: f64,
    /// `None` unless the series grows.
    pub doubling_time_years: Option<f64>,
    pub weighting: Weighting,
    pub n_used: usize,
    /// Points dropped because their value was not positive.
    pub excluded: Vec<(NaiveDate, f64)>,
    #[serde(skip)]
    pub regression: RegressionResult,
}

impl TrendFit {
    pub fn predict(&self, year: f64) -> f64 {
        (self.intercept + self.slope_per_year * year).exp()
    }
}

/// Calendar year plus the elapsed fraction, counting days from 1 January
/// over 365.25.
pub fn fractional_year(date: NaiveDate) -> f64 {
    f64::from(date.year()) + f64::from(date.ordinal0()) / 365.25
}

pub fn exp_trend(series: &[(NaiveDate, f64)], weighting: Weighting) -> Result<TrendFit, StatsError> {
    let mut x = Vec::with_capacity(series.len());
    let mut y = Vec::with_capacity(series.len());
    let mut excluded = Vec::new();
    for &(date, value) in series {
        if value > 0.0 && value.is_finite() {
            x.push(fractional_year(date));
            y.push(value.ln());
        } else {
            excluded.push((date, value));
        }
    }
    if x.len() < 3 {
        return Err(StatsError::TooFew {
            min: 3,
            got: x.len(),
        });
    }
    let ols = ols_fit(&x, &y)?;
    let regression = match weighting {
        Weighting::Ols => ols,
        Weighting::FeasibleWls => {
            let w = feasible_weights(&x, &ols.residuals)?;
            wls_fit(&x, &y, &w)?
        }
    };
    let slope = regression.slope;
    let growth_factor = slope.exp();
    Ok(TrendFit {
        slope_per_year: slope,
        intercept: regression.intercept,
        growth_factor,
        cagr_percent: 100.0 * (growth_factor - 1.0),
        doubling_time_years: (slope > 0.0).then(|| std::f64::consts::LN_2 / slope),
        weighting,
        n_used: x.len(),
        excluded,
        regression,
    })
}
