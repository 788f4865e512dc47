//! Graphics-card datasheet tables: parsing, cross-validation between
//! sources, and resolution of (possibly ambiguous) card names.

mod merge;
mod name;

use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::error::{CatalogError, RowError};

pub use merge::{
    merge_catalogs, DivergentField, MergeReport, Override, OverrideField, OverrideTable, Resolution,
};
pub use name::NormalizedName;

pub const CARD_COLUMNS: [&str; 12] = [
    "name",
    "vendor",
    "release_date",
    "die_area_mm2",
    "process_node_nm",
    "memory_gb",
    "memory_type",
    "tdp_w",
    "peak_fp64",
    "peak_fp32",
    "peak_fp16",
    "peak_tensor",
];
/// Optional trailing column naming the market segment.
pub const SEGMENT_COLUMN: &str = "segment";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CardSource {
    Techpowerup,
    Wiki,
    Datasheet,
    Other,
}

impl FromStr for CardSource {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "techpowerup" | "tpu" => Ok(CardSource::Techpowerup),
            "wiki" | "wikipedia" => Ok(CardSource::Wiki),
            "datasheet" => Ok(CardSource::Datasheet),
            "other" => Ok(CardSource::Other),
            other => Err(format!("unknown card source `{other}`")),
        }
    }
}

/// Which server layout a card is deployed in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CardSegment {
    #[default]
    Workstation,
    Consumer,
    Accelerator,
}

impl CardSegment {
    pub fn as_str(self) -> &'static str {
        match self {
            CardSegment::Workstation => "workstation",
            CardSegment::Consumer => "consumer",
            CardSegment::Accelerator => "accelerator",
        }
    }
}

impl FromStr for CardSegment {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "" | "workstation" => Ok(CardSegment::Workstation),
            "consumer" | "non-workstation" | "non_workstation" => Ok(CardSegment::Consumer),
            "accelerator" => Ok(CardSegment::Accelerator),
            other => Err(format!("unknown segment `{other}`")),
        }
    }
}

/// Peak throughput per precision, FLOP/s.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PeakCompute {
    pub fp64: Option<f64>,
    pub fp32: Option<f64>,
    pub fp16: Option<f64>,
    pub tensor: Option<f64>,
}

impl PeakCompute {
    /// Largest of the single, half and tensor peaks. Double precision is
    /// never used for training throughput.
    pub fn training_peak(&self) -> Option<f64> {
        [self.fp32, self.fp16, self.tensor]
            .into_iter()
            .flatten()
            .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.max(v))))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CardSpec {
    pub name: String,
    pub vendor: String,
    pub release_date: NaiveDate,
    pub die_area_mm2: Option<f64>,
    pub process_node_nm: Option<f64>,
    pub memory_gb: Option<f64>,
    pub memory_type: Option<String>,
    pub tdp_w: Option<f64>,
    pub peak: PeakCompute,
    pub source: CardSource,
    pub segment: CardSegment,
}

impl CardSpec {
    pub fn normalized_name(&self) -> NormalizedName {
        NormalizedName::new(&self.name)
    }

    /// Checks the per-field invariants, reporting the first violation.
    pub fn validate(&self) -> Result<(), String> {
        let positive = |label: &str, v: Option<f64>| match v {
            Some(x) if !(x > 0.0 && x.is_finite()) => Err(format!("{label} must be > 0, got {x}")),
            _ => Ok(()),
        };
        positive("die_area_mm2", self.die_area_mm2)?;
        positive("process_node_nm", self.process_node_nm)?;
        positive("tdp_w", self.tdp_w)?;
        positive("peak_fp64", self.peak.fp64)?;
        positive("peak_fp32", self.peak.fp32)?;
        positive("peak_fp16", self.peak.fp16)?;
        positive("peak_tensor", self.peak.tensor)?;
        if let Some(m) = self.memory_gb {
            if !(m >= 0.0 && m.is_finite()) {
                return Err(format!("memory_gb must be >= 0, got {m}"));
            }
        }
        let year = self.release_date.year();
        let this_year = chrono::Local::now().year();
        if !(1990..=this_year).contains(&year) {
            return Err(format!("release year {year} outside 1990..={this_year}"));
        }
        if self.name.trim().is_empty() {
            return Err("empty card name".into());
        }
        Ok(())
    }
}

/// Result of parsing a table: accepted records plus the rejected rows.
#[derive(Debug, Clone)]
pub struct Parsed<T> {
    pub records: Vec<T>,
    pub rejected: Vec<RowError>,
}

impl<T> Default for Parsed<T> {
    fn default() -> Self {
        Parsed {
            records: Vec::new(),
            rejected: Vec::new(),
        }
    }
}

fn parse_opt_f64(field: &str, raw: &str) -> Result<Option<f64>, String> {
    let raw = raw.trim();
    if raw.is_empty() {
        return Ok(None);
    }
    // tolerate the typographic minus some exports use
    let cleaned = raw.replace('\u{2212}', "-");
    cleaned
        .parse::<f64>()
        .map(Some)
        .map_err(|_| format!("{field}: cannot parse number `{raw}`"))
}

pub fn parse_date(raw: &str) -> Result<NaiveDate, String> {
    let raw = raw.trim();
    NaiveDate::parse_from_str(raw, "%Y-%m-%d")
        .or_else(|_| NaiveDate::parse_from_str(&format!("{raw}-01"), "%Y-%m-%d"))
        .map_err(|_| format!("cannot parse date `{raw}`"))
}

fn parse_card_row(
    record: &csv::StringRecord,
    has_segment: bool,
    source: CardSource,
) -> Result<CardSpec, String> {
    let get = |i: usize| record.get(i).unwrap_or("").trim();
    let name = get(0);
    if name.is_empty() {
        return Err("missing name".into());
    }
    let release_date = parse_date(get(2)).map_err(|e| format!("release_date: {e}"))?;
    let memory_type = Some(get(6).to_string()).filter(|s| !s.is_empty());
    let segment = if has_segment {
        get(12).parse::<CardSegment>()?
    } else {
        CardSegment::default()
    };
    let card = CardSpec {
        name: name.to_string(),
        vendor: get(1).to_string(),
        release_date,
        die_area_mm2: parse_opt_f64(CARD_COLUMNS[3], get(3))?,
        process_node_nm: parse_opt_f64(CARD_COLUMNS[4], get(4))?,
        memory_gb: parse_opt_f64(CARD_COLUMNS[5], get(5))?,
        memory_type,
        tdp_w: parse_opt_f64(CARD_COLUMNS[7], get(7))?,
        peak: PeakCompute {
            fp64: parse_opt_f64(CARD_COLUMNS[8], get(8))?,
            fp32: parse_opt_f64(CARD_COLUMNS[9], get(9))?,
            fp16: parse_opt_f64(CARD_COLUMNS[10], get(10))?,
            tensor: parse_opt_f64(CARD_COLUMNS[11], get(11))?,
        },
        source,
        segment,
    };
    card.validate()?;
    Ok(card)
}

/// Parses a card table from any reader. `label` names the input in errors.
pub fn parse_card_reader<R: Read>(
    reader: R,
    source: CardSource,
    label: &Path,
) -> Result<Parsed<CardSpec>, CatalogError> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(reader);
    let header = rdr
        .headers()
        .map_err(|source| CatalogError::Csv {
            path: label.to_path_buf(),
            source,
        })?
        .clone();
    let cols: Vec<&str> = header.iter().collect();
    let has_segment = cols.len() == CARD_COLUMNS.len() + 1 && cols[CARD_COLUMNS.len()] == SEGMENT_COLUMN;
    if cols[..cols.len().min(CARD_COLUMNS.len())] != CARD_COLUMNS[..]
        || !(cols.len() == CARD_COLUMNS.len() || has_segment)
    {
        return Err(CatalogError::UnknownSchema {
            path: label.to_path_buf(),
            expected: CARD_COLUMNS.join(","),
            found: cols.join(","),
        });
    }
    let mut out = Parsed::default();
    for record in rdr.records() {
        let record = record.map_err(|source| CatalogError::Csv {
            path: label.to_path_buf(),
            source,
        })?;
        let line = record.position().map_or(0, |p| p.line());
        match parse_card_row(&record, has_segment, source) {
            Ok(card) => out.records.push(card),
            Err(message) => out.rejected.push(RowError { line, message }),
        }
    }
    Ok(out)
}

pub fn parse_card_table(path: &Path, source: CardSource) -> Result<Parsed<CardSpec>, CatalogError> {
    let file = File::open(path).map_err(|e| CatalogError::MissingFile {
        path: path.to_path_buf(),
        source: e,
    })?;
    parse_card_reader(file, source, path)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Writes cards in the input schema (with the segment column).
pub fn write_card_table<W: Write>(cards: &[CardSpec], writer: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<&str> = CARD_COLUMNS.to_vec();
    header.push(SEGMENT_COLUMN);
    w.write_record(&header)?;
    for c in cards {
        w.write_record([
            c.name.clone(),
            c.vendor.clone(),
            c.release_date.format("%Y-%m-%d").to_string(),
            fmt_opt(c.die_area_mm2),
            fmt_opt(c.process_node_nm),
            fmt_opt(c.memory_gb),
            c.memory_type.clone().unwrap_or_default(),
            fmt_opt(c.tdp_w),
            fmt_opt(c.peak.fp64),
            fmt_opt(c.peak.fp32),
            fmt_opt(c.peak.fp16),
            fmt_opt(c.peak.tensor),
            c.segment.as_str().to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Query name to ordered candidate names, most plausible first.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PlausibilityMap {
    pub version: Option<String>,
    entries: BTreeMap<String, Vec<String>>,
}

impl PlausibilityMap {
    pub fn from_json_str(json: &str, label: &Path) -> Result<Self, CatalogError> {
        let bad = |message: String| CatalogError::BadPlausibility {
            path: label.to_path_buf(),
            message,
        };
        let raw: BTreeMap<String, serde_json::Value> =
            serde_json::from_str(json).map_err(|e| bad(e.to_string()))?;
        let mut map = PlausibilityMap::default();
        for (key, value) in raw {
            if key == "_version" {
                map.version = value.as_str().map(str::to_string);
                continue;
            }
            if key.starts_with('_') {
                continue;
            }
            let names: Vec<String> =
                serde_json::from_value(value).map_err(|e| bad(format!("`{key}`: {e}")))?;
            map.insert(&key, names);
        }
        Ok(map)
    }

    pub fn load(path: &Path) -> Result<Self, CatalogError> {
        let text = std::fs::read_to_string(path).map_err(|e| CatalogError::MissingFile {
            path: path.to_path_buf(),
            source: e,
        })?;
        Self::from_json_str(&text, path)
    }

    pub fn insert(&mut self, query: &str, ranked: Vec<String>) {
        self.entries.insert(NormalizedName::new(query).key(), ranked);
    }

    pub fn ranked(&self, query: &NormalizedName) -> Option<&[String]> {
        self.entries.get(&query.key()).map(Vec::as_slice)
    }
}

/// The resolution of one hardware name to catalog entries.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CardReference {
    pub query_name: String,
    /// Ordered by release date, then name.
    pub candidates: Vec<CardSpec>,
    reference_index: usize,
}

impl CardReference {
    pub fn single(query: &str, card: CardSpec) -> Self {
        CardReference {
            query_name: query.to_string(),
            candidates: vec![card],
            reference_index: 0,
        }
    }

    pub fn reference(&self) -> &CardSpec {
        &self.candidates[self.reference_index]
    }

    pub fn reference_index(&self) -> usize {
        self.reference_index
    }

    pub fn is_ambiguous(&self) -> bool {
        self.candidates.len() > 1
    }
}

pub fn resolve_card_reference(
    query: &str,
    catalog: &[CardSpec],
    plausibility: &PlausibilityMap,
) -> Result<CardReference, CatalogError> {
    if catalog.is_empty() {
        return Err(CatalogError::EmptyCatalog);
    }
    let q = NormalizedName::new(query);
    if q.is_empty() {
        return Err(CatalogError::UnresolvedName(query.to_string()));
    }
    let mut candidates: Vec<&CardSpec> = catalog
        .iter()
        .filter(|c| q.matches_exactly(&c.normalized_name()))
        .collect();
    let ranked = plausibility.ranked(&q);
    if candidates.is_empty() {
        candidates = catalog
            .iter()
            .filter(|c| {
                let n = c.normalized_name();
                q.is_family_of(&n)
                    || ranked.is_some_and(|r| {
                        r.iter().any(|name| NormalizedName::new(name).matches_exactly(&n))
                    })
            })
            .collect();
    }
    if candidates.is_empty() {
        return Err(CatalogError::UnresolvedName(query.to_string()));
    }
    candidates.sort_by(|a, b| {
        a.release_date
            .cmp(&b.release_date)
            .then_with(|| a.name.cmp(&b.name))
    });
    candidates.dedup_by(|a, b| a.normalized_name() == b.normalized_name());

    let by_rank = ranked.and_then(|r| {
        r.iter().find_map(|name| {
            let n = NormalizedName::new(name);
            candidates
                .iter()
                .position(|c| n.matches_exactly(&c.normalized_name()))
        })
    });
    // fallback: earliest release, which is the first after sorting
    let reference_index = by_rank.unwrap_or(0);
    Ok(CardReference {
        query_name: query.to_string(),
        candidates: candidates.into_iter().cloned().collect(),
        reference_index,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CardField {
    DieArea,
    ProcessNode,
    MemorySize,
    Tdp,
}

impl CardField {
    pub const ALL: [CardField; 4] = [
        CardField::DieArea,
        CardField::ProcessNode,
        CardField::MemorySize,
        CardField::Tdp,
    ];

    pub fn get(self, card: &CardSpec) -> Option<f64> {
        match self {
            CardField::DieArea => card.die_area_mm2,
            CardField::ProcessNode => card.process_node_nm,
            CardField::MemorySize => card.memory_gb,
            CardField::Tdp => card.tdp_w,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            CardField::DieArea => "die_area_mm2",
            CardField::ProcessNode => "process_node_nm",
            CardField::MemorySize => "memory_gb",
            CardField::Tdp => "tdp_w",
        }
    }
}

impl fmt::Display for CardField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CardField {
    type Err = CatalogError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "die_area" | "die_area_mm2" => Ok(CardField::DieArea),
            "process_node" | "process_node_nm" => Ok(CardField::ProcessNode),
            "memory_size" | "memory_gb" => Ok(CardField::MemorySize),
            "tdp" | "tdp_w" => Ok(CardField::Tdp),
            other => Err(CatalogError::UnknownField(other.to_string())),
        }
    }
}

/// Chronological `(release_date, value)` pairs; cards lacking the field are
/// skipped.
pub fn characteristic_series(catalog: &[CardSpec], field: CardField) -> Vec<(NaiveDate, f64)> {
    let mut points: Vec<(NaiveDate, &str, f64)> = catalog
        .iter()
        .filter_map(|c| field.get(c).map(|v| (c.release_date, c.name.as_str(), v)))
        .collect();
    points.sort_by(|a, b| a.0.cmp(&b.0).then_with(|| a.1.cmp(b.1)));
    points.into_iter().map(|(d, _, v)| (d, v)).collect()
}

const BUNDLED_WORKSTATION: &str = include_str!("../../data/cards_workstation.csv");
const BUNDLED_OTHER: &str = include_str!("../../data/cards_other.csv");
const BUNDLED_PLAUSIBILITY: &str = include_str!("../../data/plausibility.json");

fn bundled(text: &str, label: &str, source: CardSource) -> Vec<CardSpec> {
    let parsed = parse_card_reader(text.as_bytes(), source, Path::new(label)).expect("bundled card table is valid");
    debug_assert!(parsed.rejected.is_empty(), "{label}: {:?}", parsed.rejected);
    parsed.records
}

/// The bundled NVIDIA workstation and datacenter cards.
pub fn bundled_workstation_cards() -> Vec<CardSpec> {
    bundled(BUNDLED_WORKSTATION, "cards_workstation.csv", CardSource::Datasheet)
}

/// The bundled consumer cards and non-NVIDIA accelerators.
pub fn bundled_other_cards() -> Vec<CardSpec> {
    bundled(BUNDLED_OTHER, "cards_other.csv", CardSource::Other)
}

pub fn bundled_plausibility() -> PlausibilityMap {
    PlausibilityMap::from_json_str(BUNDLED_PLAUSIBILITY, Path::new("plausibility.json"))
        .expect("bundled plausibility mapping is valid")
}
