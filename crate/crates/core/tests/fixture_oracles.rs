use chrono::NaiveDate;
use mlca_trends::catalog::{
    resolve_card_reference, CardSegment, CardSource, CardSpec, PeakCompute, PlausibilityMap,
};
use mlca_trends::estimation::estimate_gpu_hours;
use mlca_trends::lca::{
    system_impact, ElectricityMix, ImpactFactors, ImpactVector, LcaConstants, LcaContext, MixTable, ServerProfile,
    ServerProfiles,
};
use mlca_trends::pipeline::compare_scenario;
use mlca_trends::stats::Weighting;
use mlca_trends::systems::{
    coverage_summary, eligible_systems, parse_systems_table, Confidence, CoverageCounts, ExclusionReason,
    SystemRecord,
};
use std::path::Path;

fn counts(v: [usize; 8]) -> CoverageCounts {
    CoverageCounts {
        systems: v[0],
        flop: v[1],
        hardware: v[2],
        flop_and_hardware: v[3],
        duration: v[4],
        quantity: v[5],
        duration_and_quantity: v[6],
        duration_quantity_and_hardware: v[7],
    }
}

fn twenty() -> Vec<SystemRecord> {
    let p = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/systems_20.csv");
    let parsed = parse_systems_table(&p).unwrap();
    assert!(parsed.rejected.is_empty(), "{:?}", parsed.rejected);
    parsed.records
}

#[test]
fn twenty_record_coverage_is_hand_counted() {
    let s = twenty();
    assert_eq!(s.len(), 20);
    let c = coverage_summary(&s);
    assert_eq!(c.all, counts([20, 11, 12, 8, 11, 11, 8, 6]));
    assert_eq!(c.by_confidence[&Confidence::Confident], counts([5, 4, 4, 4, 3, 3, 2, 2]));
    assert_eq!(c.by_confidence[&Confidence::Likely], counts([6, 2, 3, 1, 2, 3, 2, 1]));
    assert_eq!(c.by_confidence[&Confidence::Speculative], counts([5, 3, 3, 2, 4, 4, 3, 2]));
    assert_eq!(c.by_confidence[&Confidence::Unknown], counts([4, 2, 2, 1, 2, 1, 1, 1]));
}

#[test]
fn twenty_record_eligibility_is_hand_counted() {
    let (ok, excluded) = eligible_systems(&twenty());
    let names: Vec<&str> = ok.iter().map(|s| s.name.as_str()).collect();
    assert_eq!(names, ["s01", "s02", "s03", "s06", "s07", "s08", "s11", "s15", "s16", "s17", "s19"]);
    let multi: Vec<&str> = excluded
        .iter()
        .filter(|e| e.1 == ExclusionReason::MultiHardware)
        .map(|e| e.0.name.as_str())
        .collect();
    assert_eq!(multi, ["s13"]);
    assert_eq!(excluded.len(), 9);
}

#[test]
fn four_record_coverage_is_hand_counted() {
    let d = NaiveDate::from_ymd_opt(2021, 1, 1).unwrap();
    let mut a = SystemRecord::new("a", d);
    a.training_flop = Some(1e21);
    a.hardware_names = vec!["V100".into()];
    let mut b = SystemRecord::new("b", d);
    b.training_hours = Some(10.0);
    b.hardware_quantity = Some(8);
    let mut c = SystemRecord::new("c", d);
    c.training_hours = Some(10.0);
    c.hardware_quantity = Some(8);
    c.hardware_names = vec!["A100".into()];
    let e = SystemRecord::new("d", d);
    let cov = coverage_summary(&[a, b, c, e]);
    assert_eq!(cov.all, counts([4, 1, 2, 1, 2, 2, 2, 1]));
}

fn card() -> CardSpec {
    CardSpec {
        name: "X1".into(),
        vendor: "NVIDIA".into(),
        release_date: NaiveDate::from_ymd_opt(2019, 1, 1).unwrap(),
        die_area_mm2: Some(100.0),
        process_node_nm: Some(7.0),
        memory_gb: Some(0.0),
        memory_type: None,
        tdp_w: Some(400.0),
        peak: PeakCompute { fp32: Some(1e14), ..PeakCompute::default() },
        source: CardSource::Other,
        segment: CardSegment::Workstation,
    }
}

fn direct(name: &str, ymd: (i32, u32, u32), qty: u32, hours: f64) -> SystemRecord {
    let mut s = SystemRecord::new(name, NaiveDate::from_ymd_opt(ymd.0, ymd.1, ymd.2).unwrap());
    s.hardware_names = vec!["X1".into()];
    s.hardware_quantity = Some(qty);
    s.training_hours = Some(hours);
    s.countries = vec!["USA".into()];
    s
}

// Card: 1 kgCO2eq per cm2 of die, no memory or base terms, 400 W.
// Server: 4 cards per CPU of 100 W. PUE 1, 1000 h lifespan at 50%.
// Grid: 400 g/kWh. Energy per GPU-hour = (400 + 100/4)/1000 = 0.425 kWh.
#[test]
fn three_system_scenario_is_hand_computed() {
    let unit = ImpactVector::new(0.0, 1.0, 0.0);
    let factors = ImpactFactors {
        logic_per_cm2: unit,
        memory_per_gb: ImpactVector::zero(),
        board_base: ImpactVector::zero(),
        cpu_production: ImpactVector::zero(),
        ..ImpactFactors::zero()
    };
    let constants = LcaConstants { pue: 1.0, lifespan_hours: 1000.0, avg_lifetime_utilization: 0.5, training_usage: 1.0 };
    let profiles = ServerProfiles::uniform(ServerProfile { gpus_per_server: 4, cpus_per_server: 1, cpu_tdp_w: 100.0 });
    let mixes = MixTable::from_mixes([ElectricityMix {
        country: "USA".into(),
        carbon_intensity_g_per_kwh: 400.0,
        adpe_kgsb_per_kwh: 0.0,
    }]);
    let ctx = LcaContext { mixes: &mixes, profiles: &profiles, factors: &factors, constants: &constants };
    let cards = vec![card()];
    let r = resolve_card_reference("X1", &cards, &PlausibilityMap::default()).unwrap();

    let systems = [
        direct("old", (2018, 6, 1), 10, 100.0),
        direct("s1", (2020, 6, 1), 10, 100.0),
        direct("s2", (2021, 6, 1), 4, 50.0),
        direct("s3", (2022, 6, 1), 8, 80.0),
        direct("s4", (2023, 6, 1), 20, 200.0),
    ];
    let run = |ratio: Option<f64>| -> Vec<_> {
        systems
            .iter()
            .map(|s| {
                let e = estimate_gpu_hours(s, Some(&r), None, false).unwrap();
                system_impact(s, &e, &r, &ctx, ratio).unwrap()
            })
            .collect()
    };
    let real = run(None);
    let scen = run(Some(0.25));

    // embodied = qty * h / 500; usage = qty * h * 0.425 * ci / 1000
    let want_real = [172.0, 172.0, 34.4, 110.08, 688.0];
    // ci 400 * 0.75^(year - 2019): 300, 225, 168.75, 126.5625
    let want_scen = [172.0, 129.5, 19.525, 47.18, 223.15625];
    for (i, (a, b)) in real.iter().zip(&scen).enumerate() {
        assert!((a.total.reference.gwp_kg - want_real[i]).abs() < 1e-9, "{} {}", a.system, a.total.reference.gwp_kg);
        assert!((b.total.reference.gwp_kg - want_scen[i]).abs() < 1e-9, "{} {}", b.system, b.total.reference.gwp_kg);
    }

    let cmp = compare_scenario(&real, &scen, 0.25, 50.0, Weighting::FeasibleWls).unwrap();
    let names = |v: &[(String, NaiveDate, f64)]| v.iter().map(|p| p.0.clone()).collect::<Vec<_>>();
    assert_eq!(names(&cmp.real.points), ["s1", "s3", "s4"]);
    assert_eq!(cmp.real.excluded, ["s2"]);
    assert_eq!(names(&cmp.scenario.points), ["s1", "s4"]);
    assert_eq!(cmp.scenario.excluded, ["s2", "s3"]);
    assert!(cmp.real.trend.is_some());
    assert!(cmp.scenario.trend.is_none());

    let same = compare_scenario(&real, &real, 0.0, 50.0, Weighting::FeasibleWls).unwrap();
    assert_eq!(same.real, same.scenario);
}
