//! Life-cycle impacts of training runs: production (embodied) impacts of
//! the hardware, electricity use, usage impacts under country mixes, and
//! carbon-intensity reduction scenarios.

mod tables;

use std::iter::Sum;
use std::ops::{Add, AddAssign, Mul};

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::catalog::{CardReference, CardSpec};
use crate::error::LcaError;
use crate::estimation::{GpuHoursEstimate, GpuHoursMethod};
use crate::interval::EstimateInterval;
use crate::stats;
use crate::systems::SystemRecord;

pub use tables::{
    bundled_mixes, ElectricityMix, ImpactFactors, LcaConstants, MixTable, ServerProfile,
    ServerProfiles, MIX_COLUMNS, WORLD,
};

/// First year of the carbon-intensity reduction scenarios.
pub const SCENARIO_BASE_YEAR: i32 = 2019;
/// Largest yearly reduction ratio considered realistic; larger values warn.
pub const SCENARIO_MAX_RATIO: f64 = 0.25;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ImpactVector {
    pub energy_kwh: f64,
    pub gwp_kg: f64,
    pub adpe_kgsb: f64,
}

impl ImpactVector {
    pub const fn new(energy_kwh: f64, gwp_kg: f64, adpe_kgsb: f64) -> Self {
        ImpactVector {
            energy_kwh,
            gwp_kg,
            adpe_kgsb,
        }
    }

    pub const fn zero() -> Self {
        Self::new(0.0, 0.0, 0.0)
    }

    pub fn is_non_negative(&self) -> bool {
        self.energy_kwh >= 0.0 && self.gwp_kg >= 0.0 && self.adpe_kgsb >= 0.0
    }

    pub fn without_energy(self) -> Self {
        ImpactVector {
            energy_kwh: 0.0,
            ..self
        }
    }

    fn zip(self, other: Self, f: impl Fn(f64, f64) -> f64) -> Self {
        Self::new(
            f(self.energy_kwh, other.energy_kwh),
            f(self.gwp_kg, other.gwp_kg),
            f(self.adpe_kgsb, other.adpe_kgsb),
        )
    }

    pub fn component_min(self, other: Self) -> Self {
        self.zip(other, f64::min)
    }

    pub fn component_max(self, other: Self) -> Self {
        self.zip(other, f64::max)
    }

    pub fn le(&self, other: &Self) -> bool {
        self.energy_kwh <= other.energy_kwh && self.gwp_kg <= other.gwp_kg && self.adpe_kgsb <= other.adpe_kgsb
    }
}

impl Add for ImpactVector {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        self.zip(rhs, |a, b| a + b)
    }
}

impl AddAssign for ImpactVector {
    fn add_assign(&mut self, rhs: Self) {
        *self = *self + rhs;
    }
}

impl Mul<f64> for ImpactVector {
    type Output = Self;
    fn mul(self, k: f64) -> Self {
        Self::new(self.energy_kwh * k, self.gwp_kg * k, self.adpe_kgsb * k)
    }
}

impl Sum for ImpactVector {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(Self::zero(), Add::add)
    }
}

impl EstimateInterval<ImpactVector> {
    /// Component-wise span of `values` around `reference`.
    pub fn spanning_vectors(reference: ImpactVector, values: impl IntoIterator<Item = ImpactVector>) -> Self {
        let mut out = Self::degenerate(reference);
        for v in values {
            out.min = out.min.component_min(v);
            out.max = out.max.component_max(v);
        }
        out
    }

    pub fn is_ordered(&self) -> bool {
        self.min.le(&self.reference) && self.reference.le(&self.max)
    }
}

/// Production impact of one card.
pub fn production_impact(card: &CardSpec, factors: &ImpactFactors) -> Result<ImpactVector, LcaError> {
    let die = card.die_area_mm2.ok_or_else(|| LcaError::CannotEstimate {
        card: card.name.clone(),
        missing: "die_area_mm2",
    })?;
    let memory = card.memory_gb.ok_or_else(|| LcaError::CannotEstimate {
        card: card.name.clone(),
        missing: "memory_gb",
    })?;
    Ok(factors.logic_per_cm2 * (die / 100.0) + factors.memory_per_gb * memory + factors.board_base)
}

/// Production impact of the CPUs attributed to one card.
pub fn cpu_share(profile: &ServerProfile, factors: &ImpactFactors) -> ImpactVector {
    factors.cpu_production * profile.cpus_per_gpu()
}

/// Share of the production impact of `quantity` devices used for
/// `training_hours`, capped at the whole devices.
pub fn amortized_embodied(
    card_impact: ImpactVector,
    quantity: u32,
    training_hours: f64,
    constants: &LcaConstants,
) -> Result<ImpactVector, LcaError> {
    if !(training_hours > 0.0 && training_hours.is_finite()) {
        return Err(LcaError::NonPositive("training_hours", training_hours));
    }
    let fraction = (training_hours / constants.active_lifetime_hours()).min(1.0);
    Ok((card_impact * (f64::from(quantity) * fraction)).without_energy())
}

/// Amortization from GPU-hours alone, for runs whose quantity and duration
/// are unknown. No per-device cap can be applied.
pub fn amortized_embodied_for_gpu_hours(
    card_impact: ImpactVector,
    gpu_hours: f64,
    constants: &LcaConstants,
) -> Result<ImpactVector, LcaError> {
    if !(gpu_hours > 0.0 && gpu_hours.is_finite()) {
        return Err(LcaError::NonPositive("gpu_hours", gpu_hours));
    }
    Ok((card_impact * (gpu_hours / constants.active_lifetime_hours())).without_energy())
}

/// Electricity for training, in kWh: card and attributed CPU draw at the
/// training load, scaled by the PUE.
pub fn training_energy(
    gpu_hours: f64,
    card: &CardSpec,
    server: &ServerProfile,
    constants: &LcaConstants,
) -> Result<f64, LcaError> {
    if !(gpu_hours >= 0.0 && gpu_hours.is_finite()) {
        return Err(LcaError::Negative("gpu_hours", gpu_hours));
    }
    let tdp = card.tdp_w.ok_or_else(|| LcaError::CannotEstimate {
        card: card.name.clone(),
        missing: "tdp_w",
    })?;
    let gpu = gpu_hours * tdp * constants.training_usage;
    let cpu = gpu_hours * server.cpus_per_gpu() * server.cpu_tdp_w * constants.training_usage;
    Ok((gpu + cpu) * constants.pue / 1000.0)
}

pub fn usage_impact(energy_kwh: f64, mix: &ElectricityMix) -> Result<ImpactVector, LcaError> {
    if !(energy_kwh >= 0.0) {
        return Err(LcaError::Negative("energy_kwh", energy_kwh));
    }
    Ok(ImpactVector::new(
        energy_kwh,
        energy_kwh * mix.carbon_intensity_g_per_kwh / 1000.0,
        energy_kwh * mix.adpe_kgsb_per_kwh,
    ))
}

/// Carbon intensity after `release_year - 2019` whole years of reduction by
/// `ratio`. Years before 2019 are unchanged.
pub fn apply_ci_scenario(ci: f64, ratio: f64, release_year: i32) -> Result<f64, LcaError> {
    if !(ratio >= 0.0) {
        return Err(LcaError::Negative("scenario ratio", ratio));
    }
    if ratio > 1.0 {
        return Err(LcaError::BadConstant {
            name: "scenario ratio",
            value: ratio,
            rule: "must be <= 1",
        });
    }
    if ratio > SCENARIO_MAX_RATIO {
        log::warn!("scenario ratio {ratio} exceeds the explored range (<= {SCENARIO_MAX_RATIO})");
    }
    let years = release_year - SCENARIO_BASE_YEAR;
    if years <= 0 {
        return Ok(ci);
    }
    Ok(ci * (1.0 - ratio).powi(years))
}

/// Impacts of one system with the spread over candidate cards and
/// countries.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SystemImpact {
    pub system: String,
    pub date: NaiveDate,
    pub method: GpuHoursMethod,
    pub total: EstimateInterval<ImpactVector>,
    pub embodied_ref: ImpactVector,
    pub usage_ref: ImpactVector,
    pub reference_card: String,
    pub reference_country: String,
    pub scenario_ratio: Option<f64>,
}

/// Everything `system_impact` reads besides the per-system inputs.
#[derive(Debug, Clone, Copy)]
pub struct LcaContext<'a> {
    pub mixes: &'a MixTable,
    pub profiles: &'a ServerProfiles,
    pub factors: &'a ImpactFactors,
    pub constants: &'a LcaConstants,
}

fn card_impacts(
    system: &SystemRecord,
    gpu_hours: f64,
    card: &CardSpec,
    ctx: &LcaContext<'_>,
) -> Result<(ImpactVector, f64), LcaError> {
    let profile = ctx.profiles.profile_for(card);
    let per_card = production_impact(card, ctx.factors)? + cpu_share(&profile, ctx.factors);
    let embodied = match (system.hardware_quantity, system.training_hours) {
        (Some(q), Some(h)) => amortized_embodied(per_card, q, h, ctx.constants)?,
        _ => amortized_embodied_for_gpu_hours(per_card, gpu_hours, ctx.constants)?,
    };
    let energy = training_energy(gpu_hours, card, &profile, ctx.constants)?;
    Ok((embodied, energy))
}

pub fn system_impact(
    system: &SystemRecord,
    estimate: &GpuHoursEstimate,
    card_ref: &CardReference,
    ctx: &LcaContext<'_>,
    scenario_ratio: Option<f64>,
) -> Result<SystemImpact, LcaError> {
    let countries: Vec<&str> = if system.countries.is_empty() {
        vec![WORLD]
    } else {
        system.countries.iter().map(String::as_str).collect()
    };
    let year = system.publication_date.year();
    let mut mixes = Vec::with_capacity(countries.len());
    for c in &countries {
        let mut mix = ctx.mixes.get(c)?.clone();
        if let Some(r) = scenario_ratio {
            mix.carbon_intensity_g_per_kwh = apply_ci_scenario(mix.carbon_intensity_g_per_kwh, r, year)?;
        }
        mixes.push(mix);
    }

    let ref_idx = card_ref.reference_index();
    let (embodied_ref, energy_ref) = card_impacts(system, estimate.value, card_ref.reference(), ctx)?;
    let usage_ref = usage_impact(energy_ref, &mixes[0])?;
    let reference = embodied_ref + usage_ref;

    let mut combos = Vec::new();
    for (i, card) in card_ref.candidates.iter().enumerate() {
        let Some(gh) = estimate.per_candidate.get(i).copied().flatten() else {
            continue;
        };
        let (embodied, energy) = if i == ref_idx && gh == estimate.value {
            (embodied_ref, energy_ref)
        } else {
            match card_impacts(system, gh, card, ctx) {
                Ok(v) => v,
                Err(e) => {
                    log::debug!("{}: candidate {} skipped: {e}", system.name, card.name);
                    continue;
                }
            }
        };
        for mix in &mixes {
            combos.push(embodied + usage_impact(energy, mix)?);
        }
    }
    Ok(SystemImpact {
        system: system.name.clone(),
        date: system.publication_date,
        method: estimate.method,
        total: EstimateInterval::spanning_vectors(reference, combos),
        embodied_ref,
        usage_ref,
        reference_card: card_ref.reference().name.clone(),
        reference_country: countries[0].to_string(),
        scenario_ratio,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ShareSummary {
    pub n: usize,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub mean: f64,
    pub q3: f64,
    pub max: f64,
}

impl ShareSummary {
    fn of(mut values: Vec<f64>) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        values.sort_by(f64::total_cmp);
        Some(ShareSummary {
            n: values.len(),
            min: values[0],
            q1: stats::quantile_sorted(&values, 0.25),
            median: stats::quantile_sorted(&values, 0.5),
            mean: stats::mean(&values).expect("non-empty"),
            q3: stats::quantile_sorted(&values, 0.75),
            max: values[values.len() - 1],
        })
    }
}

/// Percentage of embodied impact in the total, summarised per metric.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmbodiedShareTable {
    pub gwp: Option<ShareSummary>,
    pub adpe: Option<ShareSummary>,
    /// Row indices left out because the total was zero, per metric.
    pub excluded_gwp: Vec<usize>,
    pub excluded_adpe: Vec<usize>,
}

pub fn embodied_share_table(rows: &[(ImpactVector, ImpactVector)]) -> EmbodiedShareTable {
    let mut gwp = Vec::new();
    let mut adpe = Vec::new();
    let mut excluded_gwp = Vec::new();
    let mut excluded_adpe = Vec::new();
    for (i, (embodied, total)) in rows.iter().enumerate() {
        if total.gwp_kg > 0.0 {
            gwp.push(100.0 * embodied.gwp_kg / total.gwp_kg);
        } else {
            excluded_gwp.push(i);
        }
        if total.adpe_kgsb > 0.0 {
            adpe.push(100.0 * embodied.adpe_kgsb / total.adpe_kgsb);
        } else {
            excluded_adpe.push(i);
        }
    }
    EmbodiedShareTable {
        gwp: ShareSummary::of(gwp),
        adpe: ShareSummary::of(adpe),
        excluded_gwp,
        excluded_adpe,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{parse_date, resolve_card_reference, tests::card, PlausibilityMap};
    use crate::estimation::estimate_gpu_hours;
    use approx::assert_relative_eq;

    fn gwp_only_logic() -> ImpactFactors {
        let mut f = ImpactFactors::zero();
        f.logic_per_cm2 = ImpactVector::new(0.0, 1.0, 0.0);
        f
    }

    #[test]
    fn production_is_linear() {
        let mut c = card("X", "2020-01-01");
        c.die_area_mm2 = Some(600.0);
        assert_relative_eq!(production_impact(&c, &gwp_only_logic()).unwrap().gwp_kg, 6.0);
        let f = ImpactFactors::default();
        let mut big = c.clone();
        big.memory_gb = Some(32.0);
        c.memory_gb = Some(16.0);
        let d = production_impact(&big, &f).unwrap().gwp_kg - production_impact(&c, &f).unwrap().gwp_kg;
        assert_relative_eq!(d, 16.0 * f.memory_per_gb.gwp_kg, max_relative = 1e-12);
        c.die_area_mm2 = None;
        assert!(matches!(
            production_impact(&c, &f),
            Err(LcaError::CannotEstimate { missing: "die_area_mm2", .. })
        ));
    }

    #[test]
    fn amortization() {
        let k = LcaConstants::default();
        let impact = ImpactVector::new(5.0, 150.0, 0.01);
        let a = amortized_embodied(impact, 8, 1000.0, &k).unwrap();
        assert_relative_eq!(a.gwp_kg, 91.324_200_913_242, max_relative = 1e-12);
        assert_eq!(a.energy_kwh, 0.0);
        let full = amortized_embodied(impact, 1, 13_140.0, &k).unwrap();
        assert_eq!(full.gwp_kg, 150.0);
        let capped = amortized_embodied(impact, 1, 1e6, &k).unwrap();
        assert_eq!(capped.gwp_kg, 150.0);
        assert!(amortized_embodied(impact, 1, 0.0, &k).is_err());
    }

    #[test]
    fn energy_examples() {
        let k = LcaConstants::default();
        let c = card("X", "2020-01-01");
        let server = ServerProfile {
            gpus_per_server: 4,
            cpus_per_server: 2,
            cpu_tdp_w: 150.0,
        };
        assert_relative_eq!(training_energy(400.0, &c, &server, &k).unwrap(), 165.0, max_relative = 1e-12);
        let unit = LcaConstants { pue: 1.0, ..k };
        let mut kw = c.clone();
        kw.tdp_w = Some(1000.0);
        let tiny_cpu = ServerProfile {
            gpus_per_server: 1,
            cpus_per_server: 1,
            cpu_tdp_w: f64::MIN_POSITIVE,
        };
        assert_relative_eq!(training_energy(1.0, &kw, &tiny_cpu, &unit).unwrap(), 1.0);
        let half = LcaConstants { training_usage: 0.5, ..k };
        assert_relative_eq!(training_energy(400.0, &c, &server, &half).unwrap(), 82.5, max_relative = 1e-12);
        kw.tdp_w = None;
        assert!(training_energy(1.0, &kw, &server, &k).is_err());
    }

    #[test]
    fn usage_and_scenario() {
        let mix = |ci: f64| ElectricityMix {
            country: "X".into(),
            carbon_intensity_g_per_kwh: ci,
            adpe_kgsb_per_kwh: 1e-8,
        };
        assert_relative_eq!(usage_impact(100.0, &mix(400.0)).unwrap().gwp_kg, 40.0);
        assert_eq!(usage_impact(0.0, &mix(400.0)).unwrap(), ImpactVector::zero());
        assert_relative_eq!(usage_impact(165.0, &mix(57.0)).unwrap().gwp_kg, 9.405, max_relative = 1e-12);
        assert_eq!(apply_ci_scenario(400.0, 0.25, 2019).unwrap(), 400.0);
        assert_eq!(apply_ci_scenario(400.0, 0.25, 2021).unwrap(), 225.0);
        assert_eq!(apply_ci_scenario(400.0, 0.0, 2023).unwrap(), 400.0);
        assert_eq!(apply_ci_scenario(400.0, 0.25, 2015).unwrap(), 400.0);
        assert!(matches!(apply_ci_scenario(400.0, -0.1, 2021), Err(LcaError::Negative(..))));
    }

    fn one_country_setup(ci: &[(&str, f64)]) -> MixTable {
        MixTable::from_mixes(ci.iter().map(|&(c, v)| ElectricityMix {
            country: c.into(),
            carbon_intensity_g_per_kwh: v,
            adpe_kgsb_per_kwh: 0.0,
        }))
    }

    #[test]
    fn system_impact_intervals() {
        let catalog = vec![card("T4", "2018-09-13")];
        let r = resolve_card_reference("T4", &catalog, &PlausibilityMap::default()).unwrap();
        let mut s = SystemRecord::new("s", parse_date("2020-01-01").unwrap());
        s.training_hours = Some(100.0);
        s.hardware_quantity = Some(4);
        s.hardware_names = vec!["T4".into()];
        s.countries = vec!["AAA".into(), "BBB".into()];
        let est = estimate_gpu_hours(&s, Some(&r), None, false).unwrap();
        let mixes = one_country_setup(&[("AAA", 500.0), ("BBB", 50.0), ("WLD", 400.0)]);
        let profiles = ServerProfiles::uniform(ServerProfile {
            gpus_per_server: 4,
            cpus_per_server: 2,
            cpu_tdp_w: 150.0,
        });
        let factors = ImpactFactors::zero();
        let constants = LcaConstants::default();
        let ctx = LcaContext {
            mixes: &mixes,
            profiles: &profiles,
            factors: &factors,
            constants: &constants,
        };
        let out = system_impact(&s, &est, &r, &ctx, None).unwrap();
        // 400 GPU-h at 300 W plus half a 150 W CPU: 165 kWh
        assert_relative_eq!(out.total.reference.energy_kwh, 165.0, max_relative = 1e-12);
        assert_relative_eq!(out.total.reference.gwp_kg, 82.5, max_relative = 1e-12);
        assert_relative_eq!(out.total.max.gwp_kg, 82.5, max_relative = 1e-12);
        assert_relative_eq!(out.total.min.gwp_kg, 8.25, max_relative = 1e-12);
        assert_eq!(out.reference_country, "AAA");

        s.countries.clear();
        let world = system_impact(&s, &est, &r, &ctx, None).unwrap();
        assert_eq!(world.reference_country, "WLD");
        assert_eq!(world.total.min, world.total.max);

        s.countries = vec!["ZZZ".into()];
        assert!(matches!(
            system_impact(&s, &est, &r, &ctx, None),
            Err(LcaError::UnknownCountry(_))
        ));
    }

    #[test]
    fn share_table() {
        let e = |g: f64| ImpactVector::new(0.0, g, g);
        let t = |g: f64| ImpactVector::new(1.0, g, g);
        let all = embodied_share_table(&[(e(2.0), t(2.0)), (e(5.0), t(5.0))]);
        let g = all.gwp.unwrap();
        assert_eq!((g.min, g.q1, g.median, g.mean, g.q3, g.max), (100.0, 100.0, 100.0, 100.0, 100.0, 100.0));
        let rows = [(e(1.0), t(10.0)), (e(2.0), t(10.0)), (e(3.0), t(10.0)), (e(0.0), t(0.0))];
        let s = embodied_share_table(&rows);
        let g = s.gwp.unwrap();
        assert_relative_eq!(g.median, 20.0, max_relative = 1e-12);
        assert_relative_eq!(g.mean, 20.0, max_relative = 1e-12);
        assert_eq!(s.excluded_gwp, vec![3]);
    }
}
