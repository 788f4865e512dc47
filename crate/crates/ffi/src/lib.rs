//! C ABI over `mlca_trends`.
//!
//! Every fallible function returns an [`MlcaStatus`] and writes its result
//! through an out pointer. On failure the message is kept per thread and is
//! readable with [`mlca_last_error_message`] until the next failing call on
//! that thread. Handles are opaque and must be released with their `_free`
//! function. Strings returned by the library are released with
//! [`mlca_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use chrono::NaiveDate;
use mlca_trends::catalog::{
    bundled_other_cards, bundled_plausibility, bundled_workstation_cards, parse_card_table, resolve_card_reference,
    CardSegment, CardSource, CardSpec, PeakCompute, PlausibilityMap,
};
use mlca_trends::estimation::{self, BridgeModel};
use mlca_trends::lca::{self, ElectricityMix, ImpactFactors, ImpactVector, LcaConstants, ServerProfile};
use mlca_trends::pipeline::{run_pipeline, RunConfig};
use mlca_trends::stats::{exp_trend, Weighting};
use mlca_trends::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MlcaStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidArgument = 3,
    Catalog = 10,
    Systems = 11,
    Estimation = 12,
    Lca = 13,
    Stats = 14,
    Config = 15,
    Io = 16,
    Panic = 99,
}

impl From<&Error> for MlcaStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::Catalog(_) => MlcaStatus::Catalog,
            Error::Systems(_) => MlcaStatus::Systems,
            Error::Estimation(_) => MlcaStatus::Estimation,
            Error::Lca(_) => MlcaStatus::Lca,
            Error::Stats(_) => MlcaStatus::Stats,
            Error::Config(_) => MlcaStatus::Config,
            Error::Io { .. } => MlcaStatus::Io,
        }
    }
}

struct Failure(MlcaStatus, String);

impl<E: Into<Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        let e = e.into();
        Failure(MlcaStatus::from(&e), e.to_string())
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: &str) {
    let c = CString::new(message.replace('\0', " ")).expect("interior nul removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> MlcaStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => MlcaStatus::Ok,
        Ok(Err(Failure(status, message))) => {
            set_last_error(&message);
            status
        }
        Err(_) => {
            set_last_error("internal panic");
            MlcaStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(MlcaStatus::NullPointer, format!("{what} is null"))
}

fn invalid(message: impl Into<String>) -> Failure {
    Failure(MlcaStatus::InvalidArgument, message.into())
}

unsafe fn write<T>(out: *mut T, value: T, what: &str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(MlcaStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))
}

unsafe fn slice_arg<'a, T>(p: *const T, n: usize, what: &str) -> Result<&'a [T], Failure> {
    if n == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, n))
}

unsafe fn ref_arg<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

/// Message of the last failure on the calling thread, or null. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn mlca_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static nul-terminated string.
#[no_mangle]
pub extern "C" fn mlca_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// # Safety
/// `s` must be null or a string returned by this library and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mlca_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MlcaImpact {
    pub energy_kwh: f64,
    pub gwp_kg: f64,
    pub adpe_kgsb: f64,
}

impl From<ImpactVector> for MlcaImpact {
    fn from(v: ImpactVector) -> Self {
        MlcaImpact {
            energy_kwh: v.energy_kwh,
            gwp_kg: v.gwp_kg,
            adpe_kgsb: v.adpe_kgsb,
        }
    }
}

impl From<MlcaImpact> for ImpactVector {
    fn from(v: MlcaImpact) -> Self {
        ImpactVector::new(v.energy_kwh, v.gwp_kg, v.adpe_kgsb)
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MlcaConstants {
    pub pue: f64,
    pub lifespan_hours: f64,
    pub avg_lifetime_utilization: f64,
    pub training_usage: f64,
}

impl From<LcaConstants> for MlcaConstants {
    fn from(c: LcaConstants) -> Self {
        MlcaConstants {
            pue: c.pue,
            lifespan_hours: c.lifespan_hours,
            avg_lifetime_utilization: c.avg_lifetime_utilization,
            training_usage: c.training_usage,
        }
    }
}

impl MlcaConstants {
    fn to_core(self) -> Result<LcaConstants, Failure> {
        let c = LcaConstants {
            pue: self.pue,
            lifespan_hours: self.lifespan_hours,
            avg_lifetime_utilization: self.avg_lifetime_utilization,
            training_usage: self.training_usage,
        };
        c.validate()?;
        Ok(c)
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MlcaServerProfile {
    pub gpus_per_server: u32,
    pub cpus_per_server: u32,
    pub cpu_tdp_w: f64,
}

impl MlcaServerProfile {
    fn to_core(self) -> Result<ServerProfile, Failure> {
        let p = ServerProfile {
            gpus_per_server: self.gpus_per_server,
            cpus_per_server: self.cpus_per_server,
            cpu_tdp_w: self.cpu_tdp_w,
        };
        p.validate()?;
        Ok(p)
    }
}

fn bare_card(tdp_w: Option<f64>, peak_flops: Option<f64>) -> CardSpec {
    CardSpec {
        name: "card".into(),
        vendor: String::new(),
        release_date: NaiveDate::from_ymd_opt(2020, 1, 1).expect("valid date"),
        die_area_mm2: None,
        process_node_nm: None,
        memory_gb: None,
        memory_type: None,
        tdp_w,
        peak: PeakCompute {
            fp32: peak_flops,
            ..PeakCompute::default()
        },
        source: CardSource::Other,
        segment: CardSegment::Workstation,
    }
}

/// Writes the bundled default constants.
///
/// # Safety
/// `out` must be null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn mlca_default_constants(out: *mut MlcaConstants) -> MlcaStatus {
    guard(|| write(out, LcaConstants::default().into(), "out"))
}

/// GPU-hours from a training duration and a device count.
///
/// # Safety
/// `out` must be null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn mlca_gpu_hours_direct(duration_hours: f64, quantity: u32, out: *mut f64) -> MlcaStatus {
    guard(|| write(out, estimation::gpu_hours_direct(duration_hours, quantity)?, "out"))
}

/// GPU-hours from a training FLOP count and a card's peak training
/// throughput in FLOP/s.
///
/// # Safety
/// `out` must be null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn mlca_gpu_hours_from_flop(flop: f64, peak_flops: f64, out: *mut f64) -> MlcaStatus {
    guard(|| {
        let card = bare_card(None, Some(peak_flops));
        write(out, estimation::gpu_hours_from_flop(flop, &card)?, "out")
    })
}

/// Training energy in kWh.
///
/// # Safety
/// `server` and `constants` must point to valid values; `out` must be null
/// or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn mlca_training_energy(
    gpu_hours: f64,
    tdp_w: f64,
    server: *const MlcaServerProfile,
    constants: *const MlcaConstants,
    out: *mut f64,
) -> MlcaStatus {
    guard(|| {
        let server = ref_arg(server, "server")?.to_core()?;
        let constants = ref_arg(constants, "constants")?.to_core()?;
        let card = bare_card(Some(tdp_w), None);
        write(out, lca::training_energy(gpu_hours, &card, &server, &constants)?, "out")
    })
}

/// Share of the production impact of `quantity` devices used during
/// `training_hours`.
///
/// # Safety
/// `card_impact` and `constants` must point to valid values; `out` must be
/// null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn mlca_amortized_embodied(
    card_impact: *const MlcaImpact,
    quantity: u32,
    training_hours: f64,
    constants: *const MlcaConstants,
    out: *mut MlcaImpact,
) -> MlcaStatus {
    guard(|| {
        let impact = ImpactVector::from(*ref_arg(card_impact, "card_impact")?);
        let constants = ref_arg(constants, "constants")?.to_core()?;
        let v = lca::amortized_embodied(impact, quantity, training_hours, &constants)?;
        write(out, v.into(), "out")
    })
}

/// Usage impact of `energy_kwh` on a grid with the given intensities.
///
/// # Safety
/// `out` must be null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn mlca_usage_impact(
    energy_kwh: f64,
    carbon_intensity_g_per_kwh: f64,
    adpe_kgsb_per_kwh: f64,
    out: *mut MlcaImpact,
) -> MlcaStatus {
    guard(|| {
        let mix = ElectricityMix {
            country: String::new(),
            carbon_intensity_g_per_kwh,
            adpe_kgsb_per_kwh,
        };
        write(out, lca::usage_impact(energy_kwh, &mix)?.into(), "out")
    })
}

/// Carbon intensity after a yearly relative reduction applied from the
/// base year to `release_year`.
///
/// # Safety
/// `out` must be null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn mlca_apply_ci_scenario(
    carbon_intensity_g_per_kwh: f64,
    ratio: f64,
    release_year: i32,
    out: *mut f64,
) -> MlcaStatus {
    guard(|| {
        write(
            out,
            lca::apply_ci_scenario(carbon_intensity_g_per_kwh, ratio, release_year)?,
            "out",
        )
    })
}

/// Fitted relation between direct and FLOP-based GPU-hours.
pub struct MlcaBridge {
    model: BridgeModel,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MlcaBridgeStats {
    pub intercept: f64,
    pub slope: f64,
    pub intercept_se: f64,
    pub slope_se: f64,
    pub r2: f64,
    pub adj_r2: f64,
    pub f_statistic: f64,
    pub f_p_value: f64,
    pub n_observations: usize,
    pub performance_ratio: f64,
}

/// Fits `ln(direct) = a + b ln(flop_based)` over `n` pairs.
///
/// # Safety
/// `direct_hours` and `flop_hours` must point to `n` readable values;
/// `out` must be null or valid for writes. The handle written to `out` is
/// released with [`mlca_bridge_free`].
#[no_mangle]
pub unsafe extern "C" fn mlca_bridge_fit(
    direct_hours: *const f64,
    flop_hours: *const f64,
    n: usize,
    out: *mut *mut MlcaBridge,
) -> MlcaStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let h1 = slice_arg(direct_hours, n, "direct_hours")?;
        let h2 = slice_arg(flop_hours, n, "flop_hours")?;
        let pairs: Vec<(f64, f64)> = h1.iter().copied().zip(h2.iter().copied()).collect();
        let model = estimation::fit_bridge(&pairs)?;
        out.write(Box::into_raw(Box::new(MlcaBridge { model })));
        Ok(())
    })
}

/// # Safety
/// `bridge` must be a live handle; `out` must be null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn mlca_bridge_stats(bridge: *const MlcaBridge, out: *mut MlcaBridgeStats) -> MlcaStatus {
    guard(|| {
        let m = &ref_arg(bridge, "bridge")?.model;
        let stats = MlcaBridgeStats {
            intercept: m.intercept,
            slope: m.slope,
            intercept_se: m.intercept_se,
            slope_se: m.slope_se,
            r2: m.r2,
            adj_r2: m.adj_r2,
            f_statistic: m.f_statistic,
            f_p_value: m.f_p_value,
            n_observations: m.n_observations,
            performance_ratio: m.performance_ratio,
        };
        write(out, stats, "out")
    })
}

/// Bridged GPU-hours for a FLOP-based estimate.
///
/// # Safety
/// `bridge` must be a live handle; `out` must be null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn mlca_bridge_apply(bridge: *const MlcaBridge, flop_hours: f64, out: *mut f64) -> MlcaStatus {
    guard(|| {
        let m = &ref_arg(bridge, "bridge")?.model;
        if !(flop_hours > 0.0 && flop_hours.is_finite()) {
            return Err(invalid(format!("flop_hours must be positive, got {flop_hours}")));
        }
        write(out, m.apply(flop_hours), "out")
    })
}

/// # Safety
/// `bridge` must be null or a handle from [`mlca_bridge_fit`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mlca_bridge_free(bridge: *mut MlcaBridge) {
    if !bridge.is_null() {
        drop(Box::from_raw(bridge));
    }
}

/// Card table with its plausibility ranking.
pub struct MlcaCatalog {
    cards: Vec<CardSpec>,
    plausibility: PlausibilityMap,
    factors: ImpactFactors,
}

/// Opens a card table, or the bundled catalog when `path` is null.
///
/// # Safety
/// `path` must be null or a nul-terminated string; `out` must be null or
/// valid for writes. The handle is released with [`mlca_catalog_free`].
#[no_mangle]
pub unsafe extern "C" fn mlca_catalog_open(path: *const c_char, out: *mut *mut MlcaCatalog) -> MlcaStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let cards = if path.is_null() {
            let mut c = bundled_workstation_cards();
            c.extend(bundled_other_cards());
            c
        } else {
            let p = str_arg(path, "path")?;
            parse_card_table(Path::new(p), CardSource::Other)?.records
        };
        let catalog = MlcaCatalog {
            cards,
            plausibility: bundled_plausibility(),
            factors: ImpactFactors::default(),
        };
        out.write(Box::into_raw(Box::new(catalog)));
        Ok(())
    })
}

/// # Safety
/// `catalog` must be a live handle; `out` must be null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn mlca_catalog_len(catalog: *const MlcaCatalog, out: *mut usize) -> MlcaStatus {
    guard(|| write(out, ref_arg(catalog, "catalog")?.cards.len(), "out"))
}

fn reference_card<'a>(catalog: &'a MlcaCatalog, name: &str) -> Result<&'a CardSpec, Failure> {
    let r = resolve_card_reference(name, &catalog.cards, &catalog.plausibility)?;
    let reference = r.reference().name.clone();
    catalog
        .cards
        .iter()
        .find(|c| c.name == reference)
        .ok_or_else(|| invalid(format!("reference card {reference} not in catalog")))
}

/// FLOP-based GPU-hours on the reference card resolved for `hardware_name`.
///
/// # Safety
/// `catalog` must be a live handle; `hardware_name` a nul-terminated
/// string; `out` null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn mlca_catalog_gpu_hours_from_flop(
    catalog: *const MlcaCatalog,
    hardware_name: *const c_char,
    flop: f64,
    out: *mut f64,
) -> MlcaStatus {
    guard(|| {
        let catalog = ref_arg(catalog, "catalog")?;
        let card = reference_card(catalog, str_arg(hardware_name, "hardware_name")?)?;
        write(out, estimation::gpu_hours_from_flop(flop, card)?, "out")
    })
}

/// Production impact of one reference card resolved for `hardware_name`,
/// with the bundled impact factors.
///
/// # Safety
/// `catalog` must be a live handle; `hardware_name` a nul-terminated
/// string; `out` null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn mlca_catalog_production_impact(
    catalog: *const MlcaCatalog,
    hardware_name: *const c_char,
    out: *mut MlcaImpact,
) -> MlcaStatus {
    guard(|| {
        let catalog = ref_arg(catalog, "catalog")?;
        let card = reference_card(catalog, str_arg(hardware_name, "hardware_name")?)?;
        write(out, lca::production_impact(card, &catalog.factors)?.into(), "out")
    })
}

/// # Safety
/// `catalog` must be null or a handle from [`mlca_catalog_open`] not yet
/// freed.
#[no_mangle]
pub unsafe extern "C" fn mlca_catalog_free(catalog: *mut MlcaCatalog) {
    if !catalog.is_null() {
        drop(Box::from_raw(catalog));
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MlcaWeighting {
    Ols = 0,
    FeasibleWls = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MlcaTrend {
    pub slope_per_year: f64,
    pub intercept: f64,
    pub growth_factor: f64,
    pub cagr_percent: f64,
    /// NaN when the series does not grow.
    pub doubling_time_years: f64,
    pub n_used: usize,
    pub weighting: MlcaWeighting,
}

/// Exponential trend of a dated series. Dates are days since 1970-01-01;
/// `weighting` takes an `MlcaWeighting` value.
///
/// # Safety
/// `days` and `values` must point to `n` readable values; `out` must be null
/// or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn mlca_exp_trend(
    days: *const i32,
    values: *const f64,
    n: usize,
    weighting: u32,
    out: *mut MlcaTrend,
) -> MlcaStatus {
    guard(|| {
        let days = slice_arg(days, n, "days")?;
        let values = slice_arg(values, n, "values")?;
        let epoch = NaiveDate::from_ymd_opt(1970, 1, 1).expect("valid date");
        let mut series = Vec::with_capacity(n);
        for (&d, &v) in days.iter().zip(values) {
            let date = epoch
                .checked_add_signed(chrono::Duration::days(i64::from(d)))
                .ok_or_else(|| invalid(format!("day offset {d} out of range")))?;
            series.push((date, v));
        }
        let (w, tag) = match weighting {
            0 => (Weighting::Ols, MlcaWeighting::Ols),
            1 => (Weighting::FeasibleWls, MlcaWeighting::FeasibleWls),
            other => return Err(invalid(format!("unknown weighting {other}"))),
        };
        let fit = exp_trend(&series, w)?;
        let trend = MlcaTrend {
            slope_per_year: fit.slope_per_year,
            intercept: fit.intercept,
            growth_factor: fit.growth_factor,
            cagr_percent: fit.cagr_percent,
            doubling_time_years: fit.doubling_time_years.unwrap_or(f64::NAN),
            n_used: fit.n_used,
            weighting: tag,
        };
        write(out, trend, "out")
    })
}

/// Runs the full pipeline from a JSON run config and writes the run summary
/// as a JSON string to `summary_json`, to be released with
/// [`mlca_string_free`]. `summary_json` may be null when the summary is not
/// wanted.
///
/// # Safety
/// `config_path` must be a nul-terminated string; `summary_json` must be
/// null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn mlca_run_report(config_path: *const c_char, summary_json: *mut *mut c_char) -> MlcaStatus {
    guard(|| {
        let p = str_arg(config_path, "config_path")?;
        let cfg = RunConfig::from_json_file(Path::new(p))?;
        let summary = run_pipeline(&cfg)?;
        if !summary_json.is_null() {
            let text = serde_json::to_string(&summary).map_err(|e| invalid(e.to_string()))?;
            let c = CString::new(text).map_err(|e| invalid(e.to_string()))?;
            summary_json.write(c.into_raw());
        }
        Ok(())
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn last_error() -> String {
        let p = mlca_last_error_message();
        assert!(!p.is_null());
        unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
    }

    #[test]
    fn direct_and_errors() {
        let mut v = 0.0;
        assert_eq!(unsafe { mlca_gpu_hours_direct(100.0, 4, &mut v) }, MlcaStatus::Ok);
        assert_eq!(v, 400.0);
        assert_eq!(unsafe { mlca_gpu_hours_direct(-1.0, 4, &mut v) }, MlcaStatus::Estimation);
        assert!(last_error().contains("estimation"));
        assert_eq!(unsafe { mlca_gpu_hours_direct(1.0, 4, std::ptr::null_mut()) }, MlcaStatus::NullPointer);
        assert!(last_error().contains("out"));
    }

    #[test]
    fn scenario_bounds() {
        let mut v = 0.0;
        assert_eq!(unsafe { mlca_apply_ci_scenario(400.0, 0.25, 2021, &mut v) }, MlcaStatus::Ok);
        assert_eq!(v, 225.0);
        assert_eq!(unsafe { mlca_apply_ci_scenario(400.0, 1.5, 2021, &mut v) }, MlcaStatus::Lca);
    }

    #[test]
    fn status_codes_follow_modules() {
        let e: Error = mlca_trends::error::StatsError::NonFinite.into();
        assert_eq!(MlcaStatus::from(&e), MlcaStatus::Stats);
    }
}
