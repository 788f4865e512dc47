//! End-to-end orchestration: ingestion, estimation, impacts, trends and the
//! output tables.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use chrono::{Datelike, NaiveDate};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::catalog::{
    self, bundled_other_cards, bundled_plausibility, bundled_workstation_cards, characteristic_series,
    merge_catalogs, resolve_card_reference, CardField, CardReference, CardSegment, CardSource, CardSpec,
    MergeReport, OverrideTable, PlausibilityMap,
};
use crate::error::{ConfigError, EstimationError, Error, Result};
use crate::estimation::{
    comparison_pair, detect_anomalies, estimate_gpu_hours, fit_bridge, AnomalyReason, BridgeModel,
    ComparisonPair, GpuHoursEstimate, DEFAULT_MAD_K,
};
use crate::lca::{
    bundled_mixes, embodied_share_table, system_impact, EmbodiedShareTable, ImpactFactors, LcaConstants,
    LcaContext, MixTable, ServerProfiles, SystemImpact, SCENARIO_BASE_YEAR, SCENARIO_MAX_RATIO,
};
use crate::stats::{exp_trend, fractional_year, TrendFit, Weighting};
use crate::systems::{
    coverage_summary, eligible_systems, parse_systems_table_with, ColumnMapping, CountryAliases,
    CoverageSummary, ExclusionReason, SystemRecord, SystemsSchema,
};

pub const CONFIG_ENV: &str = "MLCA_TRENDS_CONFIG";
pub const DEFAULT_GWP_FLOOR: f64 = 50.0;

pub const ESTIMATE_COLUMNS: [&str; 5] = ["system", "method", "gpu_hours_min", "gpu_hours_ref", "gpu_hours_max"];
pub const IMPACT_COLUMNS: [&str; 15] = [
    "system",
    "date",
    "energy_kwh_min",
    "energy_kwh_ref",
    "energy_kwh_max",
    "gwp_kg_min",
    "gwp_kg_ref",
    "gwp_kg_max",
    "adpe_kgsb_min",
    "adpe_kgsb_ref",
    "adpe_kgsb_max",
    "embodied_gwp_ref",
    "embodied_adpe_ref",
    "method",
    "scenario_ratio",
];
pub const TREND_COLUMNS: [&str; 12] = [
    "series",
    "row_type",
    "date",
    "year",
    "value",
    "weighting",
    "slope_per_year",
    "intercept",
    "growth_factor",
    "cagr_percent",
    "doubling_time_years",
    "n_used",
];
pub const SHARE_COLUMNS: [&str; 8] = ["metric", "n", "min", "q1", "median", "mean", "q3", "max"];
pub const SCENARIO_COLUMNS: [&str; 11] = [
    "series",
    "row_type",
    "system",
    "date",
    "year",
    "gwp_kg",
    "excluded_count",
    "slope_per_year",
    "growth_factor",
    "cagr_percent",
    "n_used",
];

/// Every input path and option of a run. Absent table paths select the
/// bundled tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub cards: Option<PathBuf>,
    pub cards_alt: Option<PathBuf>,
    /// Additional curated tables; `None` selects the bundled consumer and
    /// accelerator cards.
    pub cards_extra: Option<Vec<PathBuf>>,
    pub overrides: Option<PathBuf>,
    pub plausibility: Option<PathBuf>,
    pub systems: Option<PathBuf>,
    pub systems_columns: Option<PathBuf>,
    pub country_aliases: Option<PathBuf>,
    pub mixes: Option<PathBuf>,
    pub factors: Option<PathBuf>,
    pub constants: Option<PathBuf>,
    pub server_profiles: Option<PathBuf>,
    pub out: PathBuf,
    pub apply_bridge: bool,
    pub scenario_ratio: Option<f64>,
    pub gwp_floor: f64,
    pub weighting: Weighting,
    pub mad_k: f64,
    pub seed: Option<u64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            cards: None,
            cards_alt: None,
            cards_extra: None,
            overrides: None,
            plausibility: None,
            systems: None,
            systems_columns: None,
            country_aliases: None,
            mixes: None,
            factors: None,
            constants: None,
            server_profiles: None,
            out: PathBuf::from("out"),
            apply_bridge: true,
            scenario_ratio: None,
            gwp_floor: DEFAULT_GWP_FLOOR,
            weighting: Weighting::FeasibleWls,
            mad_k: DEFAULT_MAD_K,
            seed: None,
        }
    }
}

impl RunConfig {
    /// Reads a JSON config. Relative paths are taken relative to the
    /// directory holding the file.
    pub fn from_json_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|_| ConfigError::MissingPath(path.to_path_buf()))?;
        let mut cfg: RunConfig = serde_json::from_str(&text).map_err(|e| ConfigError::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.for_each_path(|p| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        });
        if cfg.out.is_relative() {
            cfg.out = base.join(&cfg.out);
        }
        Ok(cfg)
    }

    fn for_each_path(&mut self, mut f: impl FnMut(&mut PathBuf)) {
        for p in [
            &mut self.cards,
            &mut self.cards_alt,
            &mut self.overrides,
            &mut self.plausibility,
            &mut self.systems,
            &mut self.systems_columns,
            &mut self.country_aliases,
            &mut self.mixes,
            &mut self.factors,
            &mut self.constants,
            &mut self.server_profiles,
        ]
        .into_iter()
        .flatten()
        {
            f(p);
        }
        for p in self.cards_extra.iter_mut().flatten() {
            f(p);
        }
    }

    /// Checks that every referenced input exists and that options are in
    /// range.
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.systems.is_none() {
            return Err(ConfigError::Invalid("a systems table is required".into()));
        }
        let mut missing = None;
        self.clone().for_each_path(|p| {
            if missing.is_none() && !p.exists() {
                missing = Some(p.clone());
            }
        });
        if let Some(p) = missing {
            return Err(ConfigError::MissingPath(p));
        }
        if let Some(r) = self.scenario_ratio {
            validate_ratio(r)?;
        }
        if !(self.gwp_floor >= 0.0) {
            return Err(ConfigError::Invalid(format!("gwp_floor must be >= 0, got {}", self.gwp_floor)));
        }
        if !(self.mad_k > 0.0) {
            return Err(ConfigError::Invalid(format!("mad_k must be > 0, got {}", self.mad_k)));
        }
        Ok(())
    }

    /// Hash of the run options; the output directory is left out so that
    /// runs differing only in destination share a hash.
    pub fn sha256(&self) -> String {
        let json = serde_json::to_vec(&RunConfig {
            out: PathBuf::new(),
            ..self.clone()
        })
        .expect("config serializes");
        hex::encode(Sha256::digest(json))
    }
}

fn validate_ratio(r: f64) -> Result<(), ConfigError> {
    if !(0.0..=1.0).contains(&r) {
        return Err(ConfigError::Invalid(format!("scenario ratio must be in [0, 1], got {r}")));
    }
    if r > SCENARIO_MAX_RATIO {
        log::warn!("scenario ratio {r} exceeds the explored range (<= {SCENARIO_MAX_RATIO})");
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Provenance {
    pub tool_version: String,
    pub config_sha256: String,
    /// SHA-256 of every input file, or `bundled` for built-in tables.
    pub inputs: BTreeMap<String, String>,
    pub bridge_mode: String,
    pub weighting: Weighting,
    pub anomaly_rule: String,
    pub cpu_allocation: String,
    pub factors_version: String,
    pub scenario_ratio: Option<f64>,
    pub gwp_floor: f64,
}

/// Tables read before any computation.
#[derive(Debug, Clone)]
pub struct Inputs {
    pub catalog: Vec<CardSpec>,
    pub merge_report: MergeReport,
    pub rejected_card_rows: usize,
    pub systems: Vec<SystemRecord>,
    pub rejected_system_rows: usize,
    pub plausibility: PlausibilityMap,
    pub mixes: MixTable,
    pub factors: ImpactFactors,
    pub constants: LcaConstants,
    pub profiles: ServerProfiles,
    pub file_hashes: BTreeMap<String, String>,
}

fn hash_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(Sha256::digest(bytes)))
}

fn load_cards(path: &Path, source: CardSource) -> Result<(Vec<CardSpec>, usize)> {
    let parsed = catalog::parse_card_table(path, source)?;
    for r in &parsed.rejected {
        log::warn!("{}: {r}", path.display());
    }
    Ok((parsed.records, parsed.rejected.len()))
}

pub fn load_inputs(cfg: &RunConfig) -> Result<Inputs> {
    cfg.validate()?;
    let mut hashes = BTreeMap::new();
    let mut record = |key: &str, p: &Option<PathBuf>| -> Result<()> {
        let v = match p {
            Some(p) => hash_file(p)?,
            None => "bundled".into(),
        };
        hashes.insert(key.to_string(), v);
        Ok(())
    };
    record("cards", &cfg.cards)?;
    if cfg.cards_alt.is_some() {
        record("cards_alt", &cfg.cards_alt)?;
    }
    if cfg.overrides.is_some() {
        record("overrides", &cfg.overrides)?;
    }
    record("plausibility", &cfg.plausibility)?;
    record("systems", &cfg.systems)?;
    record("systems_columns", &cfg.systems_columns)?;
    record("country_aliases", &cfg.country_aliases)?;
    record("mixes", &cfg.mixes)?;
    record("factors", &cfg.factors)?;
    record("constants", &cfg.constants)?;
    record("server_profiles", &cfg.server_profiles)?;
    match &cfg.cards_extra {
        None => record("cards_extra", &None)?,
        Some(list) => {
            for (i, p) in list.iter().enumerate() {
                record(&format!("cards_extra[{i}]"), &Some(p.clone()))?;
            }
        }
    }

    let mut rejected_card_rows = 0;
    let primary = match &cfg.cards {
        Some(p) => {
            let (c, r) = load_cards(p, CardSource::Techpowerup)?;
            rejected_card_rows += r;
            c
        }
        None => bundled_workstation_cards(),
    };
    let overrides = match &cfg.overrides {
        Some(p) => OverrideTable::load(p)?,
        None => OverrideTable::default(),
    };
    let alt = match &cfg.cards_alt {
        Some(p) => {
            let (c, r) = load_cards(p, CardSource::Wiki)?;
            rejected_card_rows += r;
            c
        }
        None => Vec::new(),
    };
    let (mut catalog, merge_report) = merge_catalogs(&primary, &alt, &overrides)?;
    let extra = match &cfg.cards_extra {
        None => bundled_other_cards(),
        Some(list) => {
            let mut all = Vec::new();
            for p in list {
                let (c, r) = load_cards(p, CardSource::Other)?;
                rejected_card_rows += r;
                all.extend(c);
            }
            all
        }
    };
    for card in extra {
        let n = card.normalized_name();
        if !catalog.iter().any(|c| c.normalized_name().matches_exactly(&n)) {
            catalog.push(card);
        }
    }

    let schema = SystemsSchema {
        columns: match &cfg.systems_columns {
            Some(p) => ColumnMapping::load(p)?,
            None => ColumnMapping::default(),
        },
        countries: match &cfg.country_aliases {
            Some(p) => CountryAliases::load(p)?,
            None => CountryAliases::default(),
        },
    };
    let systems_path = cfg.systems.as_deref().expect("validated");
    let parsed = parse_systems_table_with(systems_path, &schema)?;
    for r in &parsed.rejected {
        log::warn!("{}: {r}", systems_path.display());
    }

    Ok(Inputs {
        catalog,
        merge_report,
        rejected_card_rows,
        systems: parsed.records,
        rejected_system_rows: parsed.rejected.len(),
        plausibility: match &cfg.plausibility {
            Some(p) => PlausibilityMap::load(p)?,
            None => bundled_plausibility(),
        },
        mixes: match &cfg.mixes {
            Some(p) => MixTable::load(p)?,
            None => bundled_mixes(),
        },
        factors: match &cfg.factors {
            Some(p) => ImpactFactors::load(p)?,
            None => ImpactFactors::default(),
        },
        constants: match &cfg.constants {
            Some(p) => LcaConstants::load(p)?,
            None => LcaConstants::default(),
        },
        profiles: match &cfg.server_profiles {
            Some(p) => ServerProfiles::load(p)?,
            None => ServerProfiles::default(),
        },
        file_hashes: hashes,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct BridgeStage {
    pub pairs: Vec<ComparisonPair>,
    pub clean: Vec<ComparisonPair>,
    pub anomalous: Vec<(ComparisonPair, AnomalyReason)>,
    pub model: Option<BridgeModel>,
}

#[derive(Debug, Clone, Serialize)]
pub struct EstimatedSystem {
    pub system: SystemRecord,
    pub card_ref: CardReference,
    pub estimate: GpuHoursEstimate,
    pub impact: SystemImpact,
}

/// Result of the computational stages of a run.
#[derive(Debug, Clone)]
pub struct Analysis {
    pub inputs: Inputs,
    pub coverage: CoverageSummary,
    pub eligible: Vec<SystemRecord>,
    pub excluded: Vec<(SystemRecord, ExclusionReason)>,
    pub bridge: BridgeStage,
    pub estimated: Vec<EstimatedSystem>,
    /// Eligible systems that could not be estimated, with the reason.
    pub skipped: Vec<(String, String)>,
    pub provenance: Provenance,
}

impl Analysis {
    pub fn lca_context(&self) -> LcaContext<'_> {
        LcaContext {
            mixes: &self.inputs.mixes,
            profiles: &self.inputs.profiles,
            factors: &self.inputs.factors,
            constants: &self.inputs.constants,
        }
    }
}

fn resolve(system: &SystemRecord, inputs: &Inputs) -> Option<Result<CardReference, String>> {
    let name = system.hardware_names.first()?;
    Some(resolve_card_reference(name, &inputs.catalog, &inputs.plausibility).map_err(|e| e.to_string()))
}

pub fn analyze(cfg: &RunConfig) -> Result<Analysis> {
    let inputs = load_inputs(cfg)?;
    analyze_inputs(cfg, inputs)
}

pub fn analyze_inputs(cfg: &RunConfig, inputs: Inputs) -> Result<Analysis> {
    let coverage = coverage_summary(&inputs.systems);
    let (eligible, excluded) = eligible_systems(&inputs.systems);
    let refs: Vec<Option<Result<CardReference, String>>> =
        eligible.par_iter().map(|s| resolve(s, &inputs)).collect();

    let pairs: Vec<ComparisonPair> = eligible
        .iter()
        .zip(&refs)
        .filter_map(|(s, r)| match r {
            Some(Ok(r)) => comparison_pair(s, r),
            _ => None,
        })
        .collect();
    let (clean, anomalous) = detect_anomalies(&pairs, cfg.mad_k);
    let xy: Vec<(f64, f64)> = clean.iter().map(|p| (p.h1, p.h2)).collect();
    let model = match fit_bridge(&xy) {
        Ok(m) => Some(m),
        Err(e) if cfg.apply_bridge => return Err(e.into()),
        Err(e) => {
            log::warn!("bridge not fitted: {e}");
            None
        }
    };
    let bridge = BridgeStage {
        pairs,
        clean,
        anomalous,
        model,
    };

    let ctx = LcaContext {
        mixes: &inputs.mixes,
        profiles: &inputs.profiles,
        factors: &inputs.factors,
        constants: &inputs.constants,
    };
    let outcomes: Vec<Result<EstimatedSystem, (String, String)>> = eligible
        .par_iter()
        .zip(refs.par_iter())
        .map(|(s, r)| {
            let skip = |reason: String| (s.name.clone(), reason);
            let card_ref = match r {
                None => return Err(skip("no hardware listed".into())),
                Some(Err(e)) => return Err(skip(e.clone())),
                Some(Ok(r)) => r.clone(),
            };
            let estimate = estimate_gpu_hours(s, Some(&card_ref), bridge.model.as_ref(), cfg.apply_bridge)
                .map_err(|e: EstimationError| skip(format!("estimation: {e}")))?;
            let impact = system_impact(s, &estimate, &card_ref, &ctx, None).map_err(|e| skip(format!("lca: {e}")))?;
            Ok(EstimatedSystem {
                system: s.clone(),
                card_ref,
                estimate,
                impact,
            })
        })
        .collect();
    let mut estimated = Vec::new();
    let mut skipped = Vec::new();
    for o in outcomes {
        match o {
            Ok(e) => estimated.push(e),
            Err(s) => {
                log::info!("skipped {}: {}", s.0, s.1);
                skipped.push(s);
            }
        }
    }

    let provenance = Provenance {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        config_sha256: cfg.sha256(),
        inputs: inputs.file_hashes.clone(),
        bridge_mode: if cfg.apply_bridge {
            "flop_based_bridged".into()
        } else {
            "flop_based".into()
        },
        weighting: cfg.weighting,
        anomaly_rule: format!("fine-tuned, or |ln(h1/h2) - median| > {} * MAD", cfg.mad_k),
        cpu_allocation: "cpu_production * cpus_per_server / gpus_per_server per card".into(),
        factors_version: inputs.factors.version.clone(),
        scenario_ratio: cfg.scenario_ratio,
        gwp_floor: cfg.gwp_floor,
    };
    Ok(Analysis {
        inputs,
        coverage,
        eligible,
        excluded,
        bridge,
        estimated,
        skipped,
        provenance,
    })
}

/// Impacts of every estimated system with carbon intensities reduced by
/// `ratio` per year. Order follows `analysis.estimated`.
pub fn scenario_impacts(analysis: &Analysis, ratio: f64) -> Result<Vec<SystemImpact>> {
    validate_ratio(ratio)?;
    let ctx = analysis.lca_context();
    analysis
        .estimated
        .par_iter()
        .map(|e| system_impact(&e.system, &e.estimate, &e.card_ref, &ctx, Some(ratio)).map_err(Error::from))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioSeries {
    pub points: Vec<(String, NaiveDate, f64)>,
    /// Systems whose reference GWP falls below the floor.
    pub excluded: Vec<String>,
    pub trend: Option<TrendFit>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioComparison {
    pub ratio: f64,
    pub gwp_floor: f64,
    pub real: ScenarioSeries,
    pub scenario: ScenarioSeries,
}

fn scenario_series(impacts: &[&SystemImpact], floor: f64, weighting: Weighting) -> ScenarioSeries {
    let mut points = Vec::new();
    let mut excluded = Vec::new();
    for i in impacts {
        if i.total.reference.gwp_kg < floor {
            excluded.push(i.system.clone());
        } else {
            points.push((i.system.clone(), i.date, i.total.reference.gwp_kg));
        }
    }
    let series: Vec<(NaiveDate, f64)> = points.iter().map(|p| (p.1, p.2)).collect();
    let trend = match exp_trend(&series, weighting) {
        Ok(t) => Some(t),
        Err(e) => {
            log::warn!("scenario trend not fitted: {e}");
            None
        }
    };
    ScenarioSeries {
        points,
        excluded,
        trend,
    }
}

/// Pairs real and scenario footprints of systems released from the
/// scenario base year on, each filtered by `gwp_floor` and fitted with an
/// exponential trend.
pub fn compare_scenario(
    real: &[SystemImpact],
    scenario: &[SystemImpact],
    ratio: f64,
    gwp_floor: f64,
    weighting: Weighting,
) -> Result<ScenarioComparison> {
    fn recent(v: &[SystemImpact]) -> Vec<&SystemImpact> {
        v.iter().filter(|i| i.date.year() >= SCENARIO_BASE_YEAR).collect()
    }
    let (r, s) = (recent(real), recent(scenario));
    if r.is_empty() {
        return Err(ConfigError::NoPostBaselineSystems(SCENARIO_BASE_YEAR).into());
    }
    Ok(ScenarioComparison {
        ratio,
        gwp_floor,
        real: scenario_series(&r, gwp_floor, weighting),
        scenario: scenario_series(&s, gwp_floor, weighting),
    })
}

pub fn scenario_compare(cfg: &RunConfig, ratio: f64) -> Result<ScenarioComparison> {
    let analysis = analyze(cfg)?;
    scenario_from_analysis(&analysis, cfg, ratio)
}

pub fn scenario_from_analysis(analysis: &Analysis, cfg: &RunConfig, ratio: f64) -> Result<ScenarioComparison> {
    let scen = scenario_impacts(analysis, ratio)?;
    let real: Vec<SystemImpact> = analysis.estimated.iter().map(|e| e.impact.clone()).collect();
    compare_scenario(&real, &scen, ratio, cfg.gwp_floor, cfg.weighting)
}

// ---- output tables ----

fn create(dir: &Path, name: &str) -> Result<(PathBuf, BufWriter<File>)> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join(name);
    let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
    Ok((path.clone(), BufWriter::new(file)))
}

fn csv_io(path: PathBuf) -> impl Fn(csv::Error) -> Error {
    move |e| Error::io(&path, std::io::Error::other(e))
}

fn num(v: f64) -> String {
    v.to_string()
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

pub fn write_coverage(analysis: &Analysis, dir: &Path) -> Result<PathBuf> {
    let (path, w) = create(dir, "coverage.csv")?;
    analysis.coverage.write_csv(w).map_err(csv_io(path.clone()))?;
    Ok(path)
}

pub fn write_coverage_json(analysis: &Analysis, dir: &Path) -> Result<PathBuf> {
    let (path, mut w) = create(dir, "coverage.json")?;
    let text = serde_json::to_string_pretty(&analysis.coverage.to_json()).expect("serializable");
    writeln!(w, "{text}").map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

pub fn write_bridge(analysis: &Analysis, dir: &Path) -> Result<PathBuf> {
    let (path, mut w) = create(dir, "bridge.json")?;
    let anomalies: Vec<_> = analysis
        .bridge
        .anomalous
        .iter()
        .map(|(p, r)| serde_json::json!({"system": p.system, "h1": p.h1, "h2": p.h2, "reason": r}))
        .collect();
    let doc = serde_json::json!({
        "provenance": analysis.provenance,
        "bridge": analysis.bridge.model,
        "pairs": analysis.bridge.pairs.len(),
        "clean_pairs": analysis.bridge.clean.iter().map(|p| serde_json::json!({"system": p.system, "h1": p.h1, "h2": p.h2})).collect::<Vec<_>>(),
        "anomalies": anomalies,
        "run": {
            "cards": analysis.inputs.catalog.len(),
            "merge": analysis.inputs.merge_report,
            "rejected_card_rows": analysis.inputs.rejected_card_rows,
            "systems": analysis.inputs.systems.len(),
            "rejected_system_rows": analysis.inputs.rejected_system_rows,
            "eligible": analysis.eligible.len(),
            "excluded": analysis.excluded.iter().map(|(s, r)| serde_json::json!({"system": s.name, "reason": r.as_str()})).collect::<Vec<_>>(),
            "estimated": analysis.estimated.len(),
            "skipped": analysis.skipped.iter().map(|(s, r)| serde_json::json!({"system": s, "reason": r})).collect::<Vec<_>>(),
        },
    });
    let text = serde_json::to_string_pretty(&doc).expect("serializable");
    writeln!(w, "{text}").map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

pub fn write_estimates(analysis: &Analysis, dir: &Path) -> Result<PathBuf> {
    let (path, w) = create(dir, "estimates.csv")?;
    let mut w = csv::Writer::from_writer(w);
    let err = csv_io(path.clone());
    w.write_record(ESTIMATE_COLUMNS).map_err(&err)?;
    for e in &analysis.estimated {
        let i = e.estimate.interval;
        w.write_record([
            e.system.name.clone(),
            e.estimate.method.to_string(),
            num(i.min),
            num(i.reference),
            num(i.max),
        ])
        .map_err(&err)?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

fn impact_row(i: &SystemImpact) -> [String; 15] {
    let t = &i.total;
    [
        i.system.clone(),
        i.date.to_string(),
        num(t.min.energy_kwh),
        num(t.reference.energy_kwh),
        num(t.max.energy_kwh),
        num(t.min.gwp_kg),
        num(t.reference.gwp_kg),
        num(t.max.gwp_kg),
        num(t.min.adpe_kgsb),
        num(t.reference.adpe_kgsb),
        num(t.max.adpe_kgsb),
        num(i.embodied_ref.gwp_kg),
        num(i.embodied_ref.adpe_kgsb),
        i.method.to_string(),
        opt(i.scenario_ratio),
    ]
}

pub fn write_impacts(analysis: &Analysis, dir: &Path) -> Result<PathBuf> {
    let (path, w) = create(dir, "impacts.csv")?;
    let mut w = csv::Writer::from_writer(w);
    let err = csv_io(path.clone());
    w.write_record(IMPACT_COLUMNS).map_err(&err)?;
    for e in &analysis.estimated {
        w.write_record(impact_row(&e.impact)).map_err(&err)?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

pub fn embodied_shares(analysis: &Analysis) -> EmbodiedShareTable {
    let rows: Vec<_> = analysis
        .estimated
        .iter()
        .map(|e| (e.impact.embodied_ref, e.impact.total.reference))
        .collect();
    embodied_share_table(&rows)
}

pub fn write_embodied_shares(analysis: &Analysis, dir: &Path) -> Result<PathBuf> {
    let table = embodied_shares(analysis);
    let (path, w) = create(dir, "embodied_shares.csv")?;
    let mut w = csv::Writer::from_writer(w);
    let err = csv_io(path.clone());
    w.write_record(SHARE_COLUMNS).map_err(&err)?;
    for (metric, s) in [("adpe", table.adpe), ("gwp", table.gwp)] {
        let row = match s {
            Some(s) => vec![
                metric.to_string(),
                s.n.to_string(),
                num(s.min),
                num(s.q1),
                num(s.median),
                num(s.mean),
                num(s.q3),
                num(s.max),
            ],
            None => {
                let mut r = vec![metric.to_string(), "0".to_string()];
                r.extend(std::iter::repeat_n(String::new(), 6));
                r
            }
        };
        w.write_record(&row).map_err(&err)?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

/// Dated values, oldest first.
pub type Series = Vec<(NaiveDate, f64)>;

/// Named `(date, value)` series for trend fitting: card characteristics of
/// workstation cards, then per-system quantities.
pub fn trend_series(analysis: &Analysis) -> Vec<(String, Series)> {
    let workstation: Vec<CardSpec> = analysis
        .inputs
        .catalog
        .iter()
        .filter(|c| c.segment == CardSegment::Workstation)
        .cloned()
        .collect();
    let mut out: Vec<(String, Vec<(NaiveDate, f64)>)> = CardField::ALL
        .iter()
        .map(|&f| (format!("card_{f}"), characteristic_series(&workstation, f)))
        .collect();
    let sys = |f: &dyn Fn(&EstimatedSystem) -> Option<f64>| -> Vec<(NaiveDate, f64)> {
        let mut v: Vec<(NaiveDate, f64)> = analysis
            .estimated
            .iter()
            .filter_map(|e| f(e).map(|x| (e.system.publication_date, x)))
            .collect();
        v.sort_by_key(|p| p.0);
        v
    };
    out.push(("system_gpu_hours".into(), sys(&|e| Some(e.estimate.value))));
    out.push(("system_hardware_quantity".into(), sys(&|e| e.system.hardware_quantity.map(f64::from))));
    out.push(("system_energy_kwh".into(), sys(&|e| Some(e.impact.total.reference.energy_kwh))));
    out.push(("system_gwp_kg".into(), sys(&|e| Some(e.impact.total.reference.gwp_kg))));
    out.push(("system_adpe_kgsb".into(), sys(&|e| Some(e.impact.total.reference.adpe_kgsb))));
    out.push(("system_embodied_gwp_kg".into(), sys(&|e| Some(e.impact.embodied_ref.gwp_kg))));
    out.push(("system_embodied_adpe_kgsb".into(), sys(&|e| Some(e.impact.embodied_ref.adpe_kgsb))));
    out
}

pub fn fit_trends(analysis: &Analysis, weighting: Weighting) -> Vec<(String, Series, Option<TrendFit>)> {
    trend_series(analysis)
        .into_par_iter()
        .map(|(name, series)| {
            let fit = exp_trend(&series, weighting)
                .map_err(|e| log::warn!("trend {name} not fitted: {e}"))
                .ok();
            (name, series, fit)
        })
        .collect()
}

fn trend_row(series: &str, weighting: Weighting, fit: &TrendFit) -> Vec<String> {
    vec![
        series.to_string(),
        "trend".into(),
        String::new(),
        String::new(),
        String::new(),
        weighting.to_string(),
        num(fit.slope_per_year),
        num(fit.intercept),
        num(fit.growth_factor),
        num(fit.cagr_percent),
        opt(fit.doubling_time_years),
        fit.n_used.to_string(),
    ]
}

pub fn write_trends(analysis: &Analysis, weighting: Weighting, dir: &Path) -> Result<PathBuf> {
    let (path, w) = create(dir, "trends.csv")?;
    let mut w = csv::Writer::from_writer(w);
    let err = csv_io(path.clone());
    w.write_record(TREND_COLUMNS).map_err(&err)?;
    for (name, series, fit) in fit_trends(analysis, weighting) {
        for (d, v) in &series {
            let mut row = vec![
                name.clone(),
                "point".into(),
                d.to_string(),
                num(fractional_year(*d)),
                num(*v),
                weighting.to_string(),
            ];
            row.extend(std::iter::repeat_n(String::new(), 6));
            w.write_record(&row).map_err(&err)?;
        }
        if let Some(fit) = fit {
            w.write_record(trend_row(&name, weighting, &fit)).map_err(&err)?;
        }
    }
    w.flush().map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

pub fn scenario_file_name(ratio: f64) -> String {
    format!("scenario_{ratio}.csv")
}

pub fn write_scenario(cmp: &ScenarioComparison, dir: &Path) -> Result<PathBuf> {
    let (path, w) = create(dir, &scenario_file_name(cmp.ratio))?;
    let mut w = csv::Writer::from_writer(w);
    let err = csv_io(path.clone());
    w.write_record(SCENARIO_COLUMNS).map_err(&err)?;
    for (label, s) in [("real", &cmp.real), ("scenario", &cmp.scenario)] {
        for (name, d, g) in &s.points {
            w.write_record([
                label,
                "point",
                name,
                &d.to_string(),
                &num(fractional_year(*d)),
                &num(*g),
                "",
                "",
                "",
                "",
                "",
            ])
            .map_err(&err)?;
        }
        w.write_record([label, "excluded", "", "", "", "", &s.excluded.len().to_string(), "", "", "", ""])
            .map_err(&err)?;
        if let Some(t) = &s.trend {
            w.write_record([
                label,
                "trend",
                "",
                "",
                "",
                "",
                "",
                &num(t.slope_per_year),
                &num(t.growth_factor),
                &num(t.cagr_percent),
                &t.n_used.to_string(),
            ])
            .map_err(&err)?;
        }
    }
    w.flush().map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

/// Writes the merged catalog, its merge report and the parsed systems in
/// canonical form.
pub fn write_ingest(analysis: &Analysis, dir: &Path) -> Result<Vec<PathBuf>> {
    let (cards_path, w) = create(dir, "cards.csv")?;
    catalog::write_card_table(&analysis.inputs.catalog, w).map_err(csv_io(cards_path.clone()))?;
    let (report_path, mut w) = create(dir, "merge_report.json")?;
    let text = serde_json::to_string_pretty(&analysis.inputs.merge_report).expect("serializable");
    writeln!(w, "{text}").map_err(|e| Error::io(&report_path, e))?;
    let (sys_path, w) = create(dir, "systems.csv")?;
    crate::systems::write_systems_table(&analysis.inputs.systems, w).map_err(csv_io(sys_path.clone()))?;
    Ok(vec![cards_path, report_path, sys_path])
}

#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub cards: usize,
    pub systems: usize,
    pub eligible: usize,
    pub excluded_multi_hardware: usize,
    pub excluded_insufficient_data: usize,
    pub pairs: usize,
    pub clean_pairs: usize,
    pub estimated: usize,
    pub skipped: usize,
    pub outputs: Vec<PathBuf>,
    pub provenance: Provenance,
}

impl RunSummary {
    pub fn new(analysis: &Analysis, outputs: Vec<PathBuf>) -> Self {
        let count = |r: ExclusionReason| analysis.excluded.iter().filter(|e| e.1 == r).count();
        RunSummary {
            cards: analysis.inputs.catalog.len(),
            systems: analysis.inputs.systems.len(),
            eligible: analysis.eligible.len(),
            excluded_multi_hardware: count(ExclusionReason::MultiHardware),
            excluded_insufficient_data: count(ExclusionReason::InsufficientData),
            pairs: analysis.bridge.pairs.len(),
            clean_pairs: analysis.bridge.clean.len(),
            estimated: analysis.estimated.len(),
            skipped: analysis.skipped.len(),
            outputs,
            provenance: analysis.provenance.clone(),
        }
    }
}

/// Runs every stage and writes the six report tables, plus the scenario
/// table when a ratio is configured.
pub fn run_pipeline(cfg: &RunConfig) -> Result<RunSummary> {
    let analysis = analyze(cfg)?;
    let dir = &cfg.out;
    let mut outputs = vec![
        write_coverage(&analysis, dir)?,
        write_bridge(&analysis, dir)?,
        write_estimates(&analysis, dir)?,
        write_impacts(&analysis, dir)?,
        write_trends(&analysis, cfg.weighting, dir)?,
        write_embodied_shares(&analysis, dir)?,
    ];
    if let Some(r) = cfg.scenario_ratio {
        let cmp = scenario_from_analysis(&analysis, cfg, r)?;
        outputs.push(write_scenario(&cmp, dir)?);
    }
    Ok(RunSummary::new(&analysis, outputs))
}
