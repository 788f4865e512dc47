use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use mlca_trends_ffi::*;

fn last_error() -> String {
    let p = mlca_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn energy_and_embodied() {
    let mut k = MlcaConstants { pue: 0.0, lifespan_hours: 0.0, avg_lifetime_utilization: 0.0, training_usage: 0.0 };
    assert_eq!(unsafe { mlca_default_constants(&mut k) }, MlcaStatus::Ok);
    let server = MlcaServerProfile { gpus_per_server: 4, cpus_per_server: 2, cpu_tdp_w: 150.0 };
    let mut e = 0.0;
    assert_eq!(unsafe { mlca_training_energy(400.0, 300.0, &server, &k, &mut e) }, MlcaStatus::Ok);
    assert!((e - 165.0).abs() < 1e-9);

    let impact = MlcaImpact { energy_kwh: 0.0, gwp_kg: 150.0, adpe_kgsb: 0.0 };
    let mut out = impact;
    assert_eq!(unsafe { mlca_amortized_embodied(&impact, 8, 1000.0, &k, &mut out) }, MlcaStatus::Ok);
    assert!((out.gwp_kg - 91.324_200_913_242).abs() < 1e-9);

    let bad = MlcaConstants { pue: 0.5, ..k };
    assert_eq!(unsafe { mlca_training_energy(1.0, 300.0, &server, &bad, &mut e) }, MlcaStatus::Lca);
    assert!(last_error().contains("pue"));
    assert_eq!(unsafe { mlca_training_energy(1.0, 300.0, ptr::null(), &k, &mut e) }, MlcaStatus::NullPointer);
}

#[test]
fn flop_estimates() {
    let mut v = 0.0;
    assert_eq!(unsafe { mlca_gpu_hours_from_flop(1e21, 1e14, &mut v) }, MlcaStatus::Ok);
    assert!((v - 1e21 / 1e14 / 3600.0).abs() < 1e-9);

    let mut cat = ptr::null_mut();
    assert_eq!(unsafe { mlca_catalog_open(ptr::null(), &mut cat) }, MlcaStatus::Ok);
    let name = CString::new("A100").unwrap();
    assert_eq!(unsafe { mlca_catalog_gpu_hours_from_flop(cat, name.as_ptr(), 1e21, &mut v) }, MlcaStatus::Ok);
    assert!(v > 0.0);
    let mut impact = MlcaImpact { energy_kwh: 0.0, gwp_kg: 0.0, adpe_kgsb: 0.0 };
    assert_eq!(unsafe { mlca_catalog_production_impact(cat, name.as_ptr(), &mut impact) }, MlcaStatus::Ok);
    assert!(impact.gwp_kg > 0.0 && impact.adpe_kgsb > 0.0);
    let bad = CString::new("Z9000").unwrap();
    assert_eq!(unsafe { mlca_catalog_gpu_hours_from_flop(cat, bad.as_ptr(), 1e21, &mut v) }, MlcaStatus::Catalog);
    unsafe { mlca_catalog_free(cat) };

    let missing = CString::new("/nonexistent/cards.csv").unwrap();
    let mut cat = ptr::null_mut();
    assert_eq!(unsafe { mlca_catalog_open(missing.as_ptr(), &mut cat) }, MlcaStatus::Catalog);
    assert!(cat.is_null());
    assert!(last_error().contains("/nonexistent/cards.csv"));
}

#[test]
fn bridge_handle() {
    let h2: Vec<f64> = (1..=20).map(|i| 5.0 * f64::from(i).powi(2)).collect();
    let h1: Vec<f64> = h2.iter().map(|h| (1.31 + h.ln()).exp()).collect();
    let mut b = ptr::null_mut();
    assert_eq!(unsafe { mlca_bridge_fit(h1.as_ptr(), h2.as_ptr(), h1.len(), &mut b) }, MlcaStatus::Ok);
    let mut s = MlcaBridgeStats {
        intercept: 0.0,
        slope: 0.0,
        intercept_se: 0.0,
        slope_se: 0.0,
        r2: 0.0,
        adj_r2: 0.0,
        f_statistic: 0.0,
        f_p_value: 0.0,
        n_observations: 0,
        performance_ratio: 0.0,
    };
    assert_eq!(unsafe { mlca_bridge_stats(b, &mut s) }, MlcaStatus::Ok);
    assert!((s.intercept - 1.31).abs() < 1e-9 && (s.slope - 1.0).abs() < 1e-9);
    assert_eq!(s.n_observations, 20);
    assert_eq!(s.performance_ratio, (-s.intercept).exp());
    let mut v = 0.0;
    assert_eq!(unsafe { mlca_bridge_apply(b, 1000.0, &mut v) }, MlcaStatus::Ok);
    assert!((v - 1000.0 * 1.31f64.exp()).abs() < 1e-6);
    assert_eq!(unsafe { mlca_bridge_apply(b, -1.0, &mut v) }, MlcaStatus::InvalidArgument);
    unsafe { mlca_bridge_free(b) };
    unsafe { mlca_bridge_free(ptr::null_mut()) };

    let mut b = ptr::null_mut();
    assert_eq!(unsafe { mlca_bridge_fit(h1.as_ptr(), h2.as_ptr(), 2, &mut b) }, MlcaStatus::Estimation);
    assert_eq!(unsafe { mlca_bridge_fit(ptr::null(), h2.as_ptr(), 3, &mut b) }, MlcaStatus::NullPointer);
}

#[test]
fn trend_over_days() {
    let days: Vec<i32> = (0..6).map(|y| y * 3653 / 10).collect();
    let values: Vec<f64> = (0..6).map(|y| 2f64.powi(y)).collect();
    let mut t = MlcaTrend {
        slope_per_year: 0.0,
        intercept: 0.0,
        growth_factor: 0.0,
        cagr_percent: 0.0,
        doubling_time_years: 0.0,
        n_used: 0,
        weighting: MlcaWeighting::Ols,
    };
    assert_eq!(unsafe { mlca_exp_trend(days.as_ptr(), values.as_ptr(), 6, 1, &mut t) }, MlcaStatus::Ok);
    assert_eq!(t.weighting, MlcaWeighting::FeasibleWls);
    assert!((t.growth_factor - 2.0).abs() < 1e-3, "{t:?}");
    assert_eq!(t.n_used, 6);
    let flat = [3.0; 6];
    assert_eq!(unsafe { mlca_exp_trend(days.as_ptr(), flat.as_ptr(), 6, 0, &mut t) }, MlcaStatus::Ok);
    assert!(t.doubling_time_years.is_nan());
    assert_eq!(unsafe { mlca_exp_trend(days.as_ptr(), values.as_ptr(), 2, 0, &mut t) }, MlcaStatus::Stats);
}

#[test]
fn report_through_config() {
    let tmp = tempfile::tempdir().unwrap();
    let systems = "name,publication_date,training_flop,hardware_names,hardware_quantity,training_hours,countries,confidence,base_model\n\
        a,2021-03-01,1e21,A100,64,100,USA,Confident,\n\
        b,2022-03-01,,V100,32,50,FRA,Likely,\n\
        c,2023-03-01,3e22,H100,,,GBR,,\n";
    std::fs::write(tmp.path().join("systems.csv"), systems).unwrap();
    let cfg = tmp.path().join("run.json");
    std::fs::write(&cfg, r#"{"systems": "systems.csv", "out": "out", "apply_bridge": false}"#).unwrap();
    let c = CString::new(cfg.to_str().unwrap()).unwrap();
    let mut summary = ptr::null_mut();
    assert_eq!(unsafe { mlca_run_report(c.as_ptr(), &mut summary) }, MlcaStatus::Ok);
    let text = unsafe { CStr::from_ptr(summary) }.to_str().unwrap().to_owned();
    unsafe { mlca_string_free(summary) };
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["systems"], 3);
    assert_eq!(v["estimated"], 3);
    assert!(tmp.path().join("out").join("impacts.csv").exists());

    std::fs::write(&cfg, r#"{"systems": "absent.csv"}"#).unwrap();
    assert_eq!(unsafe { mlca_run_report(c.as_ptr(), ptr::null_mut()) }, MlcaStatus::Config);
    assert!(last_error().contains("absent.csv"));
}

#[test]
fn c_program_links_against_header() {
    let Ok(_) = Command::new("cc").arg("--version").output() else {
        eprintln!("no C compiler, skipping");
        return;
    };
    let here = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    // Separate target directory: the staticlib in the shared one is not
    // rebuilt by `cargo test`.
    let target = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("c-abi");
    let build = Command::new(env!("CARGO"))
        .args(["build", "--offline", "--lib", "-p", "mlca-trends-ffi", "--target-dir"])
        .arg(&target)
        .output()
        .unwrap();
    assert!(build.status.success(), "{}", String::from_utf8_lossy(&build.stderr));
    let lib = target.join("debug").join("libmlca_trends_ffi.a");

    let tmp = tempfile::tempdir().unwrap();
    let bin = tmp.path().join("smoke");
    let out = Command::new("cc")
        .arg(here.join("tests/smoke.c"))
        .arg("-I")
        .arg(here.join("include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm"])
        .arg("-o")
        .arg(&bin)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let run = Command::new(&bin).output().unwrap();
    assert!(run.status.success(), "{}{}", String::from_utf8_lossy(&run.stdout), String::from_utf8_lossy(&run.stderr));
    assert!(String::from_utf8_lossy(&run.stdout).starts_with("ok "));
}
