//! Seeded generator of synthetic systems tables for testing and
//! benchmarking the pipeline.

use chrono::{Datelike, Duration, NaiveDate};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::catalog::CardSpec;
use crate::systems::{Confidence, SystemRecord};

/// Countries drawn for synthetic systems; all present in the bundled mixes.
pub const SYNTH_COUNTRIES: [&str; 9] = ["USA", "CHN", "GBR", "FRA", "DEU", "CAN", "KOR", "JPN", "WLD"];
/// Family names that resolve to several bundled cards.
pub const SYNTH_AMBIGUOUS: [&str; 3] = ["A100", "V100", "P100"];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthOptions {
    pub count: usize,
    pub seed: u64,
    /// Achieved fraction of peak throughput used to derive FLOP counts.
    pub performance_ratio: f64,
    /// Standard deviation of the log noise on FLOP counts.
    pub flop_noise: f64,
}

impl Default for SynthOptions {
    fn default() -> Self {
        SynthOptions {
            count: 1000,
            seed: 42,
            performance_ratio: 0.27,
            flop_noise: 0.15,
        }
    }
}

fn usable(card: &CardSpec) -> bool {
    card.peak.training_peak().is_some()
        && card.tdp_w.is_some()
        && card.die_area_mm2.is_some()
        && card.memory_gb.is_some()
}

/// Generates `opts.count` systems between 2012 and mid-2024 whose GPU-hours
/// grow exponentially, mixing direct-only, FLOP-only and complete records
/// with a few multi-hardware, fine-tuned and incomplete ones.
pub fn synth_systems(catalog: &[CardSpec], opts: &SynthOptions) -> Vec<SystemRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let cards: Vec<&CardSpec> = catalog.iter().filter(|c| usable(c)).collect();
    assert!(!cards.is_empty(), "synthetic generation needs at least one usable card");
    let std_normal = Normal::new(0.0, 1.0).expect("valid normal");
    let start = NaiveDate::from_ymd_opt(2012, 1, 1).expect("valid date");
    let span_days = (NaiveDate::from_ymd_opt(2024, 6, 30).expect("valid date") - start).num_days();
    let confidences = Confidence::ALL;

    let mut out = Vec::with_capacity(opts.count);
    for i in 0..opts.count {
        let date = start + Duration::days(rng.random_range(0..=span_days));
        let released: Vec<&&CardSpec> = cards.iter().filter(|c| c.release_date <= date).collect();
        let card: &CardSpec = if released.is_empty() {
            cards[rng.random_range(0..cards.len())]
        } else {
            released[rng.random_range(0..released.len())]
        };
        let hw_name = if rng.random_bool(0.1) {
            SYNTH_AMBIGUOUS[rng.random_range(0..SYNTH_AMBIGUOUS.len())].to_string()
        } else {
            card.name.clone()
        };
        let years = f64::from(date.year() - 2012) + f64::from(date.ordinal0()) / 365.25;
        let gpu_hours = (100f64.ln() + 0.9 * years + std_normal.sample(&mut rng)).exp();
        // wall-clock duration between a day and about three months
        let target_hours = rng.random_range(24f64.ln()..2000f64.ln()).exp();
        let quantity = 1u32 << ((gpu_hours / target_hours).log2().round().clamp(0.0, 20.0) as u32);
        let duration = gpu_hours / f64::from(quantity);
        let peak = card.peak.training_peak().expect("usable card");
        let flop = gpu_hours * 3600.0 * peak * opts.performance_ratio * (opts.flop_noise * std_normal.sample(&mut rng)).exp();

        let mut s = SystemRecord::new(&format!("synth-{i:04}"), date);
        s.confidence = confidences[rng.random_range(0..confidences.len())];
        let n_countries = match rng.random_range(0..10) {
            0 => 0,
            1 | 2 => 2,
            _ => 1,
        };
        while s.countries.len() < n_countries {
            let c = SYNTH_COUNTRIES[rng.random_range(0..SYNTH_COUNTRIES.len())].to_string();
            if !s.countries.contains(&c) {
                s.countries.push(c);
            }
        }
        let pattern: f64 = rng.random();
        if pattern < 0.45 {
            s.training_flop = Some(flop);
            s.hardware_names = vec![hw_name];
        } else if pattern < 0.70 {
            s.training_hours = Some(duration);
            s.hardware_quantity = Some(quantity);
            s.hardware_names = vec![hw_name];
        } else if pattern < 0.85 {
            s.training_flop = Some(flop);
            s.training_hours = Some(duration);
            s.hardware_quantity = Some(quantity);
            s.hardware_names = vec![hw_name];
            if rng.random_bool(0.1) {
                // fine-tuning runs are far shorter than the base training
                s.base_model = Some("synth-base".into());
                s.training_hours = Some(duration * 0.01);
            }
        } else if pattern < 0.90 {
            s.training_hours = Some(duration);
            s.hardware_quantity = Some(quantity);
        } else if pattern < 0.95 {
            let other = cards[rng.random_range(0..cards.len())];
            s.training_flop = Some(flop);
            s.hardware_names = vec![hw_name, other.name.clone()];
            s.hardware_names.dedup();
        } else {
            s.training_flop = rng.random_bool(0.5).then_some(flop);
        }
        out.push(s);
    }
    out
}
