//! GPU-hour estimation: the direct and FLOP-based estimators, anomaly
//! screening of paired estimates, and the log-log bridge between them.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::catalog::{CardReference, CardSpec};
use crate::error::EstimationError;
use crate::interval::EstimateInterval;
use crate::stats::{self, DiagnosticReport};
use crate::systems::SystemRecord;

pub const DEFAULT_MAD_K: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GpuHoursMethod {
    Direct,
    FlopBased,
    FlopBasedBridged,
}

impl GpuHoursMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            GpuHoursMethod::Direct => "direct",
            GpuHoursMethod::FlopBased => "flop_based",
            GpuHoursMethod::FlopBasedBridged => "flop_based_bridged",
        }
    }
}

impl fmt::Display for GpuHoursMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for GpuHoursMethod {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "direct" => Ok(GpuHoursMethod::Direct),
            "flop_based" => Ok(GpuHoursMethod::FlopBased),
            "flop_based_bridged" => Ok(GpuHoursMethod::FlopBasedBridged),
            other => Err(format!("unknown method `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GpuHoursEstimate {
    /// Value for the reference card.
    pub value: f64,
    pub method: GpuHoursMethod,
    pub interval: EstimateInterval<f64>,
    /// One value per candidate card, aligned with `CardReference::candidates`.
    /// `None` where the candidate has no usable peak.
    pub per_candidate: Vec<Option<f64>>,
}

pub fn gpu_hours_direct(duration_hours: f64, quantity: u32) -> Result<f64, EstimationError> {
    if !(duration_hours > 0.0 && duration_hours.is_finite()) {
        return Err(EstimationError::NonPositive("training duration", duration_hours));
    }
    if quantity == 0 {
        return Err(EstimationError::NonPositive("hardware quantity", 0.0));
    }
    Ok(duration_hours * f64::from(quantity))
}

/// Training FLOP over the card's best single/half/tensor peak, in hours.
pub fn gpu_hours_from_flop(flop: f64, card: &CardSpec) -> Result<f64, EstimationError> {
    if !(flop > 0.0 && flop.is_finite()) {
        return Err(EstimationError::NonPositive("training FLOP", flop));
    }
    let peak = card
        .peak
        .training_peak()
        .ok_or_else(|| EstimationError::NoUsablePeak(card.name.clone()))?;
    Ok(flop / (peak * 3600.0))
}

/// Both estimates for one system.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonPair {
    pub system: String,
    pub h1: f64,
    pub h2: f64,
    pub fine_tuned: bool,
}

impl ComparisonPair {
    pub fn log_ratio(&self) -> f64 {
        (self.h1 / self.h2).ln()
    }
}

/// Builds the pair for a system carrying both direct and FLOP inputs,
/// using the reference card. `None` when either estimator is unavailable.
pub fn comparison_pair(system: &SystemRecord, card_ref: &CardReference) -> Option<ComparisonPair> {
    let h1 = gpu_hours_direct(system.training_hours?, system.hardware_quantity?).ok()?;
    let h2 = gpu_hours_from_flop(system.training_flop?, card_ref.reference()).ok()?;
    Some(ComparisonPair {
        system: system.name.clone(),
        h1,
        h2,
        fine_tuned: system.is_fine_tuned(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum AnomalyReason {
    FineTuned,
    /// Absolute deviation of the log ratio from the median, in MAD units.
    Dispersion { deviation_mads: f64 },
}

/// Flags fine-tuned systems and pairs whose `ln(h1/h2)` lies more than
/// `k` median absolute deviations from the median. Order is preserved in
/// both outputs.
pub fn detect_anomalies(
    pairs: &[ComparisonPair],
    k: f64,
) -> (Vec<ComparisonPair>, Vec<(ComparisonPair, AnomalyReason)>) {
    let ratios: Vec<f64> = pairs.iter().map(ComparisonPair::log_ratio).collect();
    let center = stats::median(&ratios).unwrap_or(0.0);
    let deviations: Vec<f64> = ratios.iter().map(|r| (r - center).abs()).collect();
    let mad = stats::median(&deviations).unwrap_or(0.0);
    let mut clean = Vec::new();
    let mut anomalous = Vec::new();
    for (pair, dev) in pairs.iter().zip(deviations) {
        if pair.fine_tuned {
            anomalous.push((pair.clone(), AnomalyReason::FineTuned));
        } else if dev > k * mad {
            let deviation_mads = if mad > 0.0 { dev / mad } else { f64::INFINITY };
            anomalous.push((pair.clone(), AnomalyReason::Dispersion { deviation_mads }));
        } else {
            clean.push(pair.clone());
        }
    }
    (clean, anomalous)
}

/// `ln(h1) = intercept + slope * ln(h2)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BridgeModel {
    pub intercept: f64,
    pub slope: f64,
    pub intercept_se: f64,
    pub slope_se: f64,
    pub r2: f64,
    pub adj_r2: f64,
    pub f_statistic: f64,
    pub f_df: (usize, usize),
    pub f_p_value: f64,
    pub n_observations: usize,
    pub performance_ratio: f64,
    #[serde(skip_deserializing)]
    pub diagnostics: Option<DiagnosticReport>,
}

impl BridgeModel {
    /// A model with given coefficients and no fit statistics.
    pub fn from_coefficients(intercept: f64, slope: f64) -> Self {
        BridgeModel {
            intercept,
            slope,
            intercept_se: f64::NAN,
            slope_se: f64::NAN,
            r2: f64::NAN,
            adj_r2: f64::NAN,
            f_statistic: f64::NAN,
            f_df: (1, 0),
            f_p_value: f64::NAN,
            n_observations: 0,
            performance_ratio: (-intercept).exp(),
            diagnostics: None,
        }
    }

    /// Predicted GPU-h1 for a FLOP-based estimate `h2`.
    pub fn apply(&self, h2: f64) -> f64 {
        (self.intercept + self.slope * h2.ln()).exp()
    }
}

pub fn fit_bridge(pairs: &[(f64, f64)]) -> Result<BridgeModel, EstimationError> {
    if pairs.len() < 3 {
        return Err(EstimationError::TooFewPairs(pairs.len()));
    }
    for &(h1, h2) in pairs {
        if !(h1 > 0.0 && h1.is_finite()) {
            return Err(EstimationError::NonPositive("GPU-h1", h1));
        }
        if !(h2 > 0.0 && h2.is_finite()) {
            return Err(EstimationError::NonPositive("GPU-h2", h2));
        }
    }
    let x: Vec<f64> = pairs.iter().map(|p| p.1.ln()).collect();
    let y: Vec<f64> = pairs.iter().map(|p| p.0.ln()).collect();
    let fit = stats::ols_fit(&x, &y)?;
    let diagnostics = match stats::diagnose(&x, &fit.residuals) {
        Ok(d) => Some(d),
        Err(e) => {
            log::warn!("bridge diagnostics unavailable: {e}");
            None
        }
    };
    Ok(BridgeModel {
        intercept: fit.intercept,
        slope: fit.slope,
        intercept_se: fit.intercept_se,
        slope_se: fit.slope_se,
        r2: fit.r2,
        adj_r2: fit.adj_r2,
        f_statistic: fit.f_statistic,
        f_df: fit.f_df,
        f_p_value: fit.f_p_value,
        n_observations: fit.n(),
        performance_ratio: (-fit.intercept).exp(),
        diagnostics,
    })
}

/// Direct estimate when duration and quantity are known; otherwise the
/// FLOP-based estimate over every candidate card, optionally passed through
/// the bridge.
pub fn estimate_gpu_hours(
    system: &SystemRecord,
    card_ref: Option<&CardReference>,
    bridge: Option<&BridgeModel>,
    apply_bridge: bool,
) -> Result<GpuHoursEstimate, EstimationError> {
    if let (Some(hours), Some(qty)) = (system.training_hours, system.hardware_quantity) {
        let value = gpu_hours_direct(hours, qty)?;
        let n = card_ref.map_or(1, |r| r.candidates.len());
        return Ok(GpuHoursEstimate {
            value,
            method: GpuHoursMethod::Direct,
            interval: EstimateInterval::degenerate(value),
            per_candidate: vec![Some(value); n],
        });
    }
    let Some(flop) = system.training_flop else {
        return Err(EstimationError::NoEstimator(system.name.clone()));
    };
    let card_ref = card_ref.ok_or_else(|| EstimationError::MissingCard(system.name.clone()))?;
    let bridge = match (apply_bridge, bridge) {
        (false, _) => None,
        (true, Some(b)) => Some(b),
        (true, None) => return Err(EstimationError::MissingBridge),
    };
    let transform = |h2: f64| bridge.map_or(h2, |b| b.apply(h2));
    let per_candidate: Vec<Option<f64>> = card_ref
        .candidates
        .iter()
        .map(|c| gpu_hours_from_flop(flop, c).ok().map(transform))
        .collect();
    let value = transform(gpu_hours_from_flop(flop, card_ref.reference())?);
    Ok(GpuHoursEstimate {
        value,
        method: if bridge.is_some() {
            GpuHoursMethod::FlopBasedBridged
        } else {
            GpuHoursMethod::FlopBased
        },
        interval: EstimateInterval::spanning(value, per_candidate.iter().flatten().copied()),
        per_candidate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{resolve_card_reference, tests::card, PlausibilityMap};
    use approx::assert_relative_eq;

    fn pair(name: &str, h1: f64, h2: f64) -> ComparisonPair {
        ComparisonPair {
            system: name.into(),
            h1,
            h2,
            fine_tuned: false,
        }
    }

    #[test]
    fn direct_estimates() {
        assert_eq!(gpu_hours_direct(240.0, 100).unwrap(), 24_000.0);
        assert_eq!(gpu_hours_direct(1.0, 1).unwrap(), 1.0);
        assert!(matches!(gpu_hours_direct(0.0, 8), Err(EstimationError::NonPositive(..))));
        assert!(gpu_hours_direct(5.0, 0).is_err());
    }

    #[test]
    fn flop_estimates_use_best_non_fp64_peak() {
        let mut c = card("X", "2020-01-01");
        c.peak.fp32 = Some(1e14);
        assert_relative_eq!(gpu_hours_from_flop(1e21, &c).unwrap(), 2777.777777777778, max_relative = 1e-12);
        c.peak.tensor = Some(4e14);
        assert_relative_eq!(gpu_hours_from_flop(1e21, &c).unwrap(), 694.444_444_444_444_4, max_relative = 1e-12);
        c.peak = crate::catalog::PeakCompute {
            fp64: Some(1e14),
            ..Default::default()
        };
        assert!(matches!(gpu_hours_from_flop(1e21, &c), Err(EstimationError::NoUsablePeak(_))));
    }

    #[test]
    fn constant_ratio_has_no_anomalies() {
        let pairs: Vec<_> = (1..=10).map(|i| pair("s", 3.7 * i as f64, i as f64)).collect();
        let (clean, bad) = detect_anomalies(&pairs, DEFAULT_MAD_K);
        assert_eq!(clean.len(), 10);
        assert!(bad.is_empty());
    }

    #[test]
    fn outlier_and_fine_tune_are_flagged() {
        // log ratios alternate around ln 4 by +-0.1; with the two extra
        // pairs the median is ln 4 - 0.05 and the MAD is 0.1
        let mut pairs: Vec<_> = (0..20)
            .map(|i| {
                let r = 4.0f64.ln() + if i % 2 == 0 { 0.1 } else { -0.1 };
                pair("ok", 100.0 * r.exp(), 100.0)
            })
            .collect();
        pairs.push(pair("outlier", 1e-4 * 100.0, 100.0));
        let mut ft = pair("ft", 400.0, 100.0);
        ft.fine_tuned = true;
        pairs.push(ft);
        let (clean, bad) = detect_anomalies(&pairs, DEFAULT_MAD_K);
        assert_eq!(clean.len(), 20);
        assert_eq!(bad.len(), 2);
        assert_eq!(bad[0].0.system, "outlier");
        match bad[0].1 {
            AnomalyReason::Dispersion { deviation_mads } => {
                let center = 4.0f64.ln() - 0.05;
                assert_relative_eq!(deviation_mads, (center - 1e-4f64.ln()) / 0.1, max_relative = 1e-9);
            }
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(bad[1].1, AnomalyReason::FineTuned);
    }

    #[test]
    fn noiseless_bridge_recovery() {
        let pairs: Vec<(f64, f64)> = [10.0, 100.0, 1e3, 1e4, 5e4]
            .iter()
            .map(|&h2: &f64| (1.31f64.exp() * h2, h2))
            .collect();
        let b = fit_bridge(&pairs).unwrap();
        assert_relative_eq!(b.intercept, 1.31, epsilon = 1e-10);
        assert_relative_eq!(b.slope, 1.0, epsilon = 1e-12);
        assert_relative_eq!(b.r2, 1.0, epsilon = 1e-12);
        assert_eq!(b.performance_ratio, (-b.intercept).exp());
        assert!(matches!(fit_bridge(&pairs[..2]), Err(EstimationError::TooFewPairs(2))));
        assert!(matches!(
            fit_bridge(&[(1.0, 5.0), (2.0, 5.0), (3.0, 5.0)]),
            Err(EstimationError::Stats(_))
        ));
    }

    #[test]
    fn unit_slope_bridge_is_division_by_ratio() {
        let b = BridgeModel::from_coefficients(1.31, 1.0);
        assert_relative_eq!(b.apply(1000.0), 1000.0 / b.performance_ratio, max_relative = 1e-12);
        assert_relative_eq!(b.apply(1000.0), 3706.173712210199, max_relative = 1e-12);
    }

    #[test]
    fn estimate_prefers_direct_and_spans_candidates() {
        let mut fast = card("A100 SXM4 40GB", "2020-05-14");
        fast.peak.tensor = Some(3.12e14);
        let mut slow = card("A100 PCIe 40GB", "2020-06-22");
        slow.peak.tensor = Some(1.56e14);
        let catalog = vec![fast, slow];
        let r = resolve_card_reference("A100", &catalog, &PlausibilityMap::default()).unwrap();

        let mut s = SystemRecord::new("s", crate::catalog::parse_date("2021-01-01").unwrap());
        s.training_flop = Some(1e21);
        s.hardware_names = vec!["A100".into()];
        let raw = estimate_gpu_hours(&s, Some(&r), None, false).unwrap();
        assert_eq!(raw.method, GpuHoursMethod::FlopBased);
        assert_relative_eq!(raw.interval.min, 1e21 / (3.12e14 * 3600.0));
        assert_relative_eq!(raw.interval.max, 1e21 / (1.56e14 * 3600.0));
        assert_eq!(raw.value, raw.interval.min);

        let bridge = BridgeModel::from_coefficients(1.31, 1.0);
        let bridged = estimate_gpu_hours(&s, Some(&r), Some(&bridge), true).unwrap();
        assert_eq!(bridged.method, GpuHoursMethod::FlopBasedBridged);
        assert_relative_eq!(bridged.value, raw.value * 1.31f64.exp(), max_relative = 1e-12);
        assert!(matches!(
            estimate_gpu_hours(&s, Some(&r), None, true),
            Err(EstimationError::MissingBridge)
        ));

        s.training_hours = Some(240.0);
        s.hardware_quantity = Some(100);
        let direct = estimate_gpu_hours(&s, Some(&r), Some(&bridge), true).unwrap();
        assert_eq!(direct.method, GpuHoursMethod::Direct);
        assert_eq!(direct.value, 24_000.0);
        assert_eq!(direct.interval, EstimateInterval::degenerate(24_000.0));
    }
}
