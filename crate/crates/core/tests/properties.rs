use chrono::NaiveDate;
use mlca_trends::catalog::{
    merge_catalogs, parse_card_reader, resolve_card_reference, write_card_table, CardSegment, CardSource,
    CardSpec, OverrideTable, PeakCompute, PlausibilityMap,
};
use mlca_trends::estimation::{estimate_gpu_hours, gpu_hours_from_flop, GpuHoursMethod};
use mlca_trends::lca::{
    apply_ci_scenario, system_impact, training_energy, ElectricityMix, ImpactFactors, ImpactVector, LcaConstants,
    LcaContext, MixTable, ServerProfile, ServerProfiles,
};
use mlca_trends::stats::{durbin_watson, exp_trend, shapiro_wilk, wls_fit, Weighting};
use mlca_trends::systems::{coverage_summary, eligible_systems, SystemRecord};
use proptest::prelude::*;

fn date(days: i64) -> NaiveDate {
    NaiveDate::from_ymd_opt(2010, 1, 1).unwrap() + chrono::Duration::days(days)
}

prop_compose! {
    fn arb_card(names: &'static [&'static str])(
        idx in 0..names.len(),
        days in 0i64..4000,
        die in prop::option::of(50.0f64..900.0),
        node in prop::option::of(3.0f64..40.0),
        mem in prop::option::of(0.0f64..96.0),
        tdp in prop::option::of(30.0f64..700.0),
        fp32 in prop::option::of(1e12f64..1e14),
        tensor in prop::option::of(1e13f64..1e15),
    ) -> CardSpec {
        CardSpec {
            name: names[idx].to_string(),
            vendor: "NVIDIA".into(),
            release_date: date(days),
            die_area_mm2: die,
            process_node_nm: node,
            memory_gb: mem,
            memory_type: Some("HBM2".into()),
            tdp_w: tdp,
            peak: PeakCompute { fp64: None, fp32, fp16: None, tensor },
            source: CardSource::Other,
            segment: CardSegment::Workstation,
        }
    }
}

const NAMES: &[&str] = &["A", "B", "C", "D", "E", "F"];

prop_compose! {
    fn arb_system()(
        days in 0i64..5000,
        flop in prop::option::of(1e18f64..1e25),
        hw in prop::collection::vec(prop::sample::select(vec!["V100", "A100", "TPUv3", "NVIDIA V100"]), 0..3),
        qty in prop::option::of(1u32..4096),
        hours in prop::option::of(0.5f64..5000.0),
    ) -> SystemRecord {
        let mut s = SystemRecord::new("s", date(days));
        s.training_flop = flop;
        s.hardware_names = hw.into_iter().map(String::from).collect();
        s.hardware_quantity = qty;
        s.training_hours = hours;
        s
    }
}

fn full_card(name: &str, tdp: f64, tensor: f64, die: f64) -> CardSpec {
    CardSpec {
        name: name.into(),
        vendor: "NVIDIA".into(),
        release_date: date(3000),
        die_area_mm2: Some(die),
        process_node_nm: Some(7.0),
        memory_gb: Some(40.0),
        memory_type: None,
        tdp_w: Some(tdp),
        peak: PeakCompute { fp64: None, fp32: Some(1.95e13), fp16: None, tensor: Some(tensor) },
        source: CardSource::Other,
        segment: CardSegment::Workstation,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn merge_validated_set_is_symmetric(
        a in prop::collection::vec(arb_card(NAMES), 0..6),
        b in prop::collection::vec(arb_card(NAMES), 0..6),
    ) {
        let none = OverrideTable::default();
        let (_, ab) = merge_catalogs(&a, &b, &none).unwrap();
        let (_, ba) = merge_catalogs(&b, &a, &none).unwrap();
        prop_assert_eq!(&ab.validated_keys, &ba.validated_keys);
        prop_assert_eq!(ab.validated, ba.validated);
        prop_assert!(ab.validated <= ab.total_cards);
        prop_assert_eq!(ab.validated + ab.divergent_cards + ab.single_source, ab.total_cards);
    }

    #[test]
    fn card_tables_round_trip(cards in prop::collection::vec(arb_card(NAMES), 0..8)) {
        let mut buf = Vec::new();
        write_card_table(&cards, &mut buf).unwrap();
        let back = parse_card_reader(buf.as_slice(), CardSource::Other, std::path::Path::new("rt")).unwrap();
        prop_assert!(back.rejected.is_empty());
        prop_assert_eq!(back.records, cards);
    }

    #[test]
    fn resolution_is_deterministic(cards in prop::collection::vec(arb_card(NAMES), 1..8), q in prop::sample::select(NAMES)) {
        let map = PlausibilityMap::default();
        let r1 = resolve_card_reference(q, &cards, &map).ok();
        let r2 = resolve_card_reference(q, &cards, &map).ok();
        if let Some(r) = &r1 {
            prop_assert!(r.candidates.contains(r.reference()));
        }
        prop_assert_eq!(r1, r2);
    }

    #[test]
    fn coverage_conjunctions_are_monotone(systems in prop::collection::vec(arb_system(), 0..40)) {
        let c = coverage_summary(&systems).all;
        prop_assert!(c.flop_and_hardware <= c.flop.min(c.hardware));
        prop_assert!(c.duration_and_quantity <= c.duration.min(c.quantity));
        prop_assert!(c.duration_quantity_and_hardware <= c.duration_and_quantity.min(c.hardware));
        prop_assert!(c.flop.max(c.hardware).max(c.duration).max(c.quantity) <= c.systems);
        prop_assert_eq!(c.systems, systems.len());
    }

    #[test]
    fn eligibility_partitions_input(systems in prop::collection::vec(arb_system(), 0..40)) {
        let (ok, excluded) = eligible_systems(&systems);
        prop_assert_eq!(ok.len() + excluded.len(), systems.len());
        let mut rebuilt: Vec<&SystemRecord> = ok.iter().chain(excluded.iter().map(|e| &e.0)).collect();
        let mut orig: Vec<&SystemRecord> = systems.iter().collect();
        let key = |s: &&SystemRecord| format!("{:?}", s);
        rebuilt.sort_by_key(key);
        orig.sort_by_key(key);
        prop_assert_eq!(rebuilt, orig);
    }

    #[test]
    fn direct_inputs_always_win(s in arb_system()) {
        let cards = vec![full_card("V100", 300.0, 1.25e14, 815.0), full_card("A100", 400.0, 3.12e14, 826.0), full_card("TPUv3", 450.0, 1.23e14, 700.0)];
        let map = PlausibilityMap::default();
        let r = s.hardware_names.first().and_then(|h| resolve_card_reference(h, &cards, &map).ok());
        if let Ok(est) = estimate_gpu_hours(&s, r.as_ref(), None, false) {
            prop_assert!(est.value > 0.0);
            prop_assert!(est.interval.is_ordered());
            if s.has_direct_inputs() {
                prop_assert_eq!(est.method, GpuHoursMethod::Direct);
            }
        }
    }

    #[test]
    fn flop_estimate_linear_and_antitone(flop in 1e15f64..1e24, k in 1.01f64..100.0, peak in 1e12f64..1e15) {
        let mut c = full_card("X", 300.0, peak, 600.0);
        c.peak.fp32 = None;
        let h = gpu_hours_from_flop(flop, &c).unwrap();
        let h2 = gpu_hours_from_flop(flop * k, &c).unwrap();
        prop_assert!((h2 / h - k).abs() <= 1e-9 * k);
        c.peak.tensor = Some(peak * k);
        prop_assert!(gpu_hours_from_flop(flop, &c).unwrap() < h);
    }

    #[test]
    fn system_impact_interval_is_ordered(
        tdps in prop::collection::vec(50.0f64..700.0, 1..4),
        cis in prop::collection::vec(0.0f64..1200.0, 1..4),
        flop in 1e18f64..1e24,
        bump in 0.0f64..500.0,
    ) {
        let cards: Vec<CardSpec> = tdps.iter().enumerate()
            .map(|(i, t)| full_card(&format!("Z100 V{i}"), *t, 1e14 * (i + 1) as f64, 500.0 + 100.0 * i as f64))
            .collect();
        let r = resolve_card_reference("Z100", &cards, &PlausibilityMap::default()).unwrap();
        let codes: Vec<String> = (0..cis.len()).map(|i| format!("C{i}")).collect();
        let mixes = MixTable::from_mixes(codes.iter().zip(&cis).map(|(c, ci)| ElectricityMix {
            country: c.clone(), carbon_intensity_g_per_kwh: *ci, adpe_kgsb_per_kwh: 1e-8,
        }));
        let mut s = SystemRecord::new("s", date(4000));
        s.training_flop = Some(flop);
        s.hardware_names = vec!["Z100".into()];
        s.countries = codes.clone();
        let est = estimate_gpu_hours(&s, Some(&r), None, false).unwrap();
        let profiles = ServerProfiles::default();
        let factors = ImpactFactors::default();
        let constants = LcaConstants::default();
        let ctx = LcaContext { mixes: &mixes, profiles: &profiles, factors: &factors, constants: &constants };
        let out = system_impact(&s, &est, &r, &ctx, None).unwrap();
        prop_assert!(out.total.is_ordered());

        // raising every carbon intensity never lowers the reference GWP
        let higher = MixTable::from_mixes(mixes.iter().map(|m| ElectricityMix {
            carbon_intensity_g_per_kwh: m.carbon_intensity_g_per_kwh + bump, ..m.clone()
        }));
        let ctx2 = LcaContext { mixes: &higher, ..ctx };
        let out2 = system_impact(&s, &est, &r, &ctx2, None).unwrap();
        prop_assert!(out2.total.reference.gwp_kg >= out.total.reference.gwp_kg);
    }

    #[test]
    fn adpe_is_embodied_when_grid_adpe_is_tiny(flop in 1e18f64..1e25, ci in 0.0f64..1000.0, adpe in 0.0f64..1e-9) {
        let cards = vec![full_card("A100 SXM4 40GB", 400.0, 3.12e14, 826.0)];
        let r = resolve_card_reference("A100 SXM4 40GB", &cards, &PlausibilityMap::default()).unwrap();
        let mixes = MixTable::from_mixes([ElectricityMix { country: "WLD".into(), carbon_intensity_g_per_kwh: ci, adpe_kgsb_per_kwh: adpe }]);
        let mut s = SystemRecord::new("s", date(4000));
        s.training_flop = Some(flop);
        s.hardware_names = vec!["A100".into()];
        let est = estimate_gpu_hours(&s, Some(&r), None, false).unwrap();
        let (p, f, k) = (ServerProfiles::default(), ImpactFactors::default(), LcaConstants::default());
        let ctx = LcaContext { mixes: &mixes, profiles: &p, factors: &f, constants: &k };
        let out = system_impact(&s, &est, &r, &ctx, None).unwrap();
        prop_assert!(100.0 * out.embodied_ref.adpe_kgsb / out.total.reference.adpe_kgsb >= 99.0);
    }

    #[test]
    fn scenario_nests(ci in 0.0f64..1500.0, r in 0.0f64..=0.25, y in 2019i32..2040) {
        let next = apply_ci_scenario(ci, r, y + 1).unwrap();
        let this = apply_ci_scenario(ci, r, y).unwrap();
        prop_assert!((next - this * (1.0 - r)).abs() <= 1e-9 * ci.max(1.0));
    }

    #[test]
    fn energy_is_linear(gh in 0.0f64..1e7, k in 0.0f64..10.0, pue in 1.0f64..2.0) {
        let c = full_card("X", 300.0, 1e14, 600.0);
        let server = ServerProfile { gpus_per_server: 4, cpus_per_server: 2, cpu_tdp_w: 150.0 };
        let consts = LcaConstants { pue, ..LcaConstants::default() };
        let e = training_energy(gh, &c, &server, &consts).unwrap();
        let ek = training_energy(gh * k, &c, &server, &consts).unwrap();
        prop_assert!((ek - k * e).abs() <= 1e-9 * (k * e).max(1.0));
        let unit = training_energy(gh, &c, &server, &LcaConstants { pue: 1.0, ..consts }).unwrap();
        prop_assert!((e - pue * unit).abs() <= 1e-9 * e.max(1.0));
    }

    #[test]
    fn impact_vector_arithmetic(
        a in (0.0f64..1e6, 0.0f64..1e6, 0.0f64..1.0),
        b in (0.0f64..1e6, 0.0f64..1e6, 0.0f64..1.0),
        c in (0.0f64..1e6, 0.0f64..1e6, 0.0f64..1.0),
    ) {
        let v = |t: (f64, f64, f64)| ImpactVector::new(t.0, t.1, t.2);
        let (a, b, c) = (v(a), v(b), v(c));
        prop_assert_eq!(a + b, b + a);
        let l = (a + b) + c;
        let r = a + (b + c);
        prop_assert!((l.gwp_kg - r.gwp_kg).abs() <= 1e-9 * l.gwp_kg.max(1.0));
        prop_assert_eq!(a * 0.0, ImpactVector::zero());
    }

    #[test]
    fn wls_scale_equivariance(
        pts in prop::collection::vec((0.0f64..10.0, -5.0f64..5.0, 0.1f64..5.0), 3..30),
        c in 0.1f64..100.0,
    ) {
        let x: Vec<f64> = pts.iter().map(|p| p.0).collect();
        let y: Vec<f64> = pts.iter().map(|p| p.1).collect();
        let w: Vec<f64> = pts.iter().map(|p| p.2).collect();
        let Ok(base) = wls_fit(&x, &y, &w) else { return Ok(()); };
        let yc: Vec<f64> = y.iter().map(|v| v * c).collect();
        let scaled = wls_fit(&x, &yc, &w).unwrap();
        let tol = |v: f64| 1e-8 * v.abs().max(1.0);
        prop_assert!((scaled.intercept - c * base.intercept).abs() <= tol(c * base.intercept));
        prop_assert!((scaled.slope - c * base.slope).abs() <= tol(c * base.slope));
        let wc: Vec<f64> = w.iter().map(|v| v * c).collect();
        let reweighted = wls_fit(&x, &y, &wc).unwrap();
        prop_assert!((reweighted.intercept - base.intercept).abs() <= tol(base.intercept));
        prop_assert!((reweighted.slope - base.slope).abs() <= tol(base.slope));
    }

    #[test]
    fn trend_slope_ignores_units(
        pts in prop::collection::vec((0i64..5000, 0.1f64..1e6), 3..40),
        c in 1e-3f64..1e3,
        ols in any::<bool>(),
    ) {
        let weighting = if ols { Weighting::Ols } else { Weighting::FeasibleWls };
        let s: Vec<(NaiveDate, f64)> = pts.iter().map(|p| (date(p.0), p.1)).collect();
        let sc: Vec<(NaiveDate, f64)> = s.iter().map(|p| (p.0, p.1 * c)).collect();
        if let (Ok(a), Ok(b)) = (exp_trend(&s, weighting), exp_trend(&sc, weighting)) {
            prop_assert!((a.slope_per_year - b.slope_per_year).abs() <= 1e-6 * a.slope_per_year.abs().max(1e-3));
            prop_assert!(a.growth_factor > 0.0);
        }
    }

    #[test]
    fn durbin_watson_in_range(e in prop::collection::vec(-1e3f64..1e3, 2..100)) {
        if let Ok((d, p)) = durbin_watson(&e) {
            prop_assert!((0.0..=4.0).contains(&d));
            prop_assert!(p.is_nan() || (0.0..=1.0).contains(&p));
        }
    }

    #[test]
    fn shapiro_affine_invariant(
        s in prop::collection::vec(-100.0f64..100.0, 3..200),
        a in -50.0f64..50.0,
        b in 0.01f64..50.0,
    ) {
        if let Ok((w, p)) = shapiro_wilk(&s) {
            prop_assert!(w > 0.0 && w <= 1.0 + 1e-12);
            prop_assert!((0.0..=1.0).contains(&p));
            let t: Vec<f64> = s.iter().map(|v| a + b * v).collect();
            let (wt, _) = shapiro_wilk(&t).unwrap();
            prop_assert!((w - wt).abs() <= 1e-8);
        }
    }
}
