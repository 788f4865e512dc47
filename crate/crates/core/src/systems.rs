//! The notable-ML-systems table: ingestion, coverage statistics and the
//! eligibility filter for impact estimation.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::catalog::{parse_date, NormalizedName, Parsed};
use crate::error::{RowError, SystemsError};

const DEFAULT_COLUMNS: &str = include_str!("../data/systems_columns.json");
const DEFAULT_COUNTRIES: &str = include_str!("../data/country_aliases.json");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Confidence {
    Confident,
    Likely,
    Speculative,
    #[default]
    Unknown,
}

impl Confidence {
    pub const ALL: [Confidence; 4] = [
        Confidence::Confident,
        Confidence::Likely,
        Confidence::Speculative,
        Confidence::Unknown,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Confidence::Confident => "Confident",
            Confidence::Likely => "Likely",
            Confidence::Speculative => "Speculative",
            Confidence::Unknown => "Unknown",
        }
    }

    fn parse_lenient(raw: &str) -> Self {
        match raw.trim().to_ascii_lowercase().as_str() {
            "confident" => Confidence::Confident,
            "likely" => Confidence::Likely,
            "speculative" => Confidence::Speculative,
            _ => Confidence::Unknown,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemRecord {
    pub name: String,
    pub publication_date: NaiveDate,
    pub training_flop: Option<f64>,
    /// Hardware names as listed in the source cell; empty when absent.
    pub hardware_names: Vec<String>,
    pub hardware_quantity: Option<u32>,
    pub training_hours: Option<f64>,
    /// Country codes in source order; the first one is the reference.
    pub countries: Vec<String>,
    pub confidence: Confidence,
    /// Set for fine-tuned systems.
    pub base_model: Option<String>,
}

impl SystemRecord {
    pub fn new(name: &str, publication_date: NaiveDate) -> Self {
        SystemRecord {
            name: name.to_string(),
            publication_date,
            training_flop: None,
            hardware_names: Vec::new(),
            hardware_quantity: None,
            training_hours: None,
            countries: Vec::new(),
            confidence: Confidence::Unknown,
            base_model: None,
        }
    }

    pub fn has_flop(&self) -> bool {
        self.training_flop.is_some()
    }
    pub fn has_hardware(&self) -> bool {
        !self.hardware_names.is_empty()
    }
    pub fn has_duration(&self) -> bool {
        self.training_hours.is_some()
    }
    pub fn has_quantity(&self) -> bool {
        self.hardware_quantity.is_some()
    }
    pub fn has_direct_inputs(&self) -> bool {
        self.has_duration() && self.has_quantity()
    }
    pub fn has_flop_inputs(&self) -> bool {
        self.has_flop() && self.has_hardware()
    }
    pub fn is_fine_tuned(&self) -> bool {
        self.base_model.is_some()
    }

    /// Distinct hardware names after normalisation, in source order.
    pub fn distinct_hardware(&self) -> Vec<&str> {
        let mut seen: Vec<NormalizedName> = Vec::new();
        let mut out = Vec::new();
        for h in &self.hardware_names {
            let n = NormalizedName::new(h);
            if !seen.iter().any(|s| s.matches_exactly(&n)) {
                seen.push(n);
                out.push(h.as_str());
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SystemField {
    Name,
    PublicationDate,
    TrainingFlop,
    HardwareNames,
    HardwareQuantity,
    TrainingHours,
    Countries,
    Confidence,
    BaseModel,
}

impl SystemField {
    pub const ALL: [SystemField; 9] = [
        SystemField::Name,
        SystemField::PublicationDate,
        SystemField::TrainingFlop,
        SystemField::HardwareNames,
        SystemField::HardwareQuantity,
        SystemField::TrainingHours,
        SystemField::Countries,
        SystemField::Confidence,
        SystemField::BaseModel,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SystemField::Name => "name",
            SystemField::PublicationDate => "publication_date",
            SystemField::TrainingFlop => "training_flop",
            SystemField::HardwareNames => "hardware_names",
            SystemField::HardwareQuantity => "hardware_quantity",
            SystemField::TrainingHours => "training_hours",
            SystemField::Countries => "countries",
            SystemField::Confidence => "confidence",
            SystemField::BaseModel => "base_model",
        }
    }
}

impl FromStr for SystemField {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        SystemField::ALL
            .into_iter()
            .find(|f| f.as_str() == s)
            .ok_or_else(|| format!("unknown field `{s}`"))
    }
}

/// Upstream column name to record field. Canonical field names are always
/// accepted as column names as well.
#[derive(Debug, Clone, PartialEq)]
pub struct ColumnMapping {
    pub version: Option<String>,
    columns: BTreeMap<String, SystemField>,
}

impl ColumnMapping {
    pub fn from_json_str(json: &str, label: &Path) -> Result<Self, SystemsError> {
        let bad = |message: String| SystemsError::BadMapping {
            path: label.to_path_buf(),
            message,
        };
        let raw: BTreeMap<String, String> = serde_json::from_str(json).map_err(|e| bad(e.to_string()))?;
        let mut out = ColumnMapping {
            version: None,
            columns: BTreeMap::new(),
        };
        for (col, field) in raw {
            if col == "_version" {
                out.version = Some(field);
            } else if !col.starts_with('_') {
                out.columns.insert(col, field.parse().map_err(bad)?);
            }
        }
        Ok(out)
    }

    pub fn load(path: &Path) -> Result<Self, SystemsError> {
        let text = std::fs::read_to_string(path).map_err(|e| SystemsError::MissingFile {
            path: path.to_path_buf(),
            source: e,
        })?;
        Self::from_json_str(&text, path)
    }

    fn field_for(&self, column: &str) -> Option<SystemField> {
        self.columns
            .get(column)
            .copied()
            .or_else(|| column.parse().ok())
    }
}

impl Default for ColumnMapping {
    fn default() -> Self {
        Self::from_json_str(DEFAULT_COLUMNS, Path::new("systems_columns.json"))
            .expect("bundled column mapping is valid")
    }
}

/// Country names (as spelled upstream) to ISO-3166 alpha-3 codes. Multi-
/// national entries map to the world pseudo-country `WLD`.
#[derive(Debug, Clone, PartialEq)]
pub struct CountryAliases {
    pub version: Option<String>,
    names: BTreeMap<String, String>,
}

impl CountryAliases {
    pub fn from_json_str(json: &str, label: &Path) -> Result<Self, SystemsError> {
        let raw: BTreeMap<String, String> =
            serde_json::from_str(json).map_err(|e| SystemsError::BadMapping {
                path: label.to_path_buf(),
                message: e.to_string(),
            })?;
        let mut out = CountryAliases {
            version: None,
            names: BTreeMap::new(),
        };
        for (name, code) in raw {
            if name == "_version" {
                out.version = Some(code);
            } else {
                out.names.insert(name.trim().to_lowercase(), code);
            }
        }
        Ok(out)
    }

    pub fn load(path: &Path) -> Result<Self, SystemsError> {
        let text = std::fs::read_to_string(path).map_err(|e| SystemsError::MissingFile {
            path: path.to_path_buf(),
            source: e,
        })?;
        Self::from_json_str(&text, path)
    }

    /// Unknown names pass through unchanged so that an existing code (or a
    /// typo) reaches the mix lookup, which reports it.
    pub fn code_for(&self, name: &str) -> String {
        let trimmed = name.trim();
        self.names
            .get(&trimmed.to_lowercase())
            .cloned()
            .unwrap_or_else(|| trimmed.to_string())
    }
}

impl Default for CountryAliases {
    fn default() -> Self {
        Self::from_json_str(DEFAULT_COUNTRIES, Path::new("country_aliases.json"))
            .expect("bundled country aliases are valid")
    }
}

/// Splits a multi-valued cell on `;` or `,`, dropping empty items.
pub fn split_multi(cell: &str) -> Vec<String> {
    cell.split([';', ','])
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::to_string)
        .collect()
}

fn parse_positive(label: &str, raw: &str) -> Result<Option<f64>, String> {
    let raw = raw.trim();
    if raw.is_empty() {
        return Ok(None);
    }
    let v: f64 = raw
        .replace('\u{2212}', "-")
        .parse()
        .map_err(|_| format!("{label}: cannot parse number `{raw}`"))?;
    if !(v > 0.0 && v.is_finite()) {
        return Err(format!("{label} must be > 0, got {raw}"));
    }
    Ok(Some(v))
}

#[derive(Debug, Clone, Default)]
pub struct SystemsSchema {
    pub columns: ColumnMapping,
    pub countries: CountryAliases,
}

pub fn parse_systems_reader<R: Read>(
    reader: R,
    schema: &SystemsSchema,
    label: &Path,
) -> Result<Parsed<SystemRecord>, SystemsError> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(reader);
    let csv_err = |source| SystemsError::Csv {
        path: label.to_path_buf(),
        source,
    };
    let header = rdr.headers().map_err(csv_err)?.clone();
    let mut index: BTreeMap<SystemField, usize> = BTreeMap::new();
    for (i, col) in header.iter().enumerate() {
        if let Some(field) = schema.columns.field_for(col) {
            // first matching column wins
            index.entry(field).or_insert(i);
        }
    }
    for required in [SystemField::Name, SystemField::PublicationDate] {
        if !index.contains_key(&required) {
            return Err(SystemsError::MissingColumn {
                path: label.to_path_buf(),
                field: required.as_str().to_string(),
            });
        }
    }

    let mut out = Parsed::default();
    for record in rdr.records() {
        let record = record.map_err(csv_err)?;
        let line = record.position().map_or(0, |p| p.line());
        let cell = |f: SystemField| index.get(&f).and_then(|&i| record.get(i)).unwrap_or("").trim();
        let row = (|| -> Result<SystemRecord, String> {
            let name = cell(SystemField::Name);
            if name.is_empty() {
                return Err("missing name".into());
            }
            let date = parse_date(cell(SystemField::PublicationDate))
                .map_err(|e| format!("publication_date: {e}"))?;
            let mut rec = SystemRecord::new(name, date);
            rec.training_flop = parse_positive("training_flop", cell(SystemField::TrainingFlop))?;
            rec.training_hours = parse_positive("training_hours", cell(SystemField::TrainingHours))?;
            rec.hardware_quantity = match parse_positive("hardware_quantity", cell(SystemField::HardwareQuantity))? {
                None => None,
                Some(q) if q >= 1.0 && q.fract() == 0.0 && q <= u32::MAX as f64 => Some(q as u32),
                Some(q) => return Err(format!("hardware_quantity must be a whole number >= 1, got {q}")),
            };
            rec.hardware_names = split_multi(cell(SystemField::HardwareNames));
            rec.countries = split_multi(cell(SystemField::Countries))
                .iter()
                .map(|c| schema.countries.code_for(c))
                .collect();
            rec.confidence = Confidence::parse_lenient(cell(SystemField::Confidence));
            rec.base_model = Some(cell(SystemField::BaseModel).to_string()).filter(|s| !s.is_empty());
            Ok(rec)
        })();
        match row {
            Ok(rec) => out.records.push(rec),
            Err(message) => out.rejected.push(RowError { line, message }),
        }
    }
    Ok(out)
}

pub fn parse_systems_table(path: &Path) -> Result<Parsed<SystemRecord>, SystemsError> {
    parse_systems_table_with(path, &SystemsSchema::default())
}

pub fn parse_systems_table_with(
    path: &Path,
    schema: &SystemsSchema,
) -> Result<Parsed<SystemRecord>, SystemsError> {
    let file = File::open(path).map_err(|e| SystemsError::MissingFile {
        path: path.to_path_buf(),
        source: e,
    })?;
    parse_systems_reader(file, schema, path)
}

/// Writes records with canonical column names, readable by
/// [`parse_systems_table`].
pub fn write_systems_table<W: Write>(systems: &[SystemRecord], writer: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(SystemField::ALL.map(SystemField::as_str))?;
    for s in systems {
        w.write_record([
            s.name.clone(),
            s.publication_date.to_string(),
            s.training_flop.map(|v| format!("{v:e}")).unwrap_or_default(),
            s.hardware_names.join(";"),
            s.hardware_quantity.map(|v| v.to_string()).unwrap_or_default(),
            s.training_hours.map(|v| v.to_string()).unwrap_or_default(),
            s.countries.join(";"),
            s.confidence.label().to_string(),
            s.base_model.clone().unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Presence counts for one group of records.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct CoverageCounts {
    pub systems: usize,
    pub flop: usize,
    pub hardware: usize,
    pub flop_and_hardware: usize,
    pub duration: usize,
    pub quantity: usize,
    pub duration_and_quantity: usize,
    pub duration_quantity_and_hardware: usize,
}

impl CoverageCounts {
    fn add(&mut self, s: &SystemRecord) {
        self.systems += 1;
        self.flop += s.has_flop() as usize;
        self.hardware += s.has_hardware() as usize;
        self.flop_and_hardware += s.has_flop_inputs() as usize;
        self.duration += s.has_duration() as usize;
        self.quantity += s.has_quantity() as usize;
        self.duration_and_quantity += s.has_direct_inputs() as usize;
        self.duration_quantity_and_hardware += (s.has_direct_inputs() && s.has_hardware()) as usize;
    }

    pub fn as_array(&self) -> [usize; 8] {
        [
            self.systems,
            self.flop,
            self.hardware,
            self.flop_and_hardware,
            self.duration,
            self.quantity,
            self.duration_and_quantity,
            self.duration_quantity_and_hardware,
        ]
    }

    /// Each count as a percentage of `total`; zeros when `total` is 0.
    pub fn percentages(&self, total: usize) -> [f64; 8] {
        self.as_array().map(|c| {
            if total == 0 {
                0.0
            } else {
                c as f64 / total as f64 * 100.0
            }
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct CoverageSummary {
    pub all: CoverageCounts,
    pub by_confidence: BTreeMap<Confidence, CoverageCounts>,
}

pub const COVERAGE_COLUMNS: [&str; 9] = [
    "row",
    "systems",
    "flop",
    "hardware",
    "flop_and_hardware",
    "duration",
    "quantity",
    "duration_and_quantity",
    "duration_quantity_and_hardware",
];

impl CoverageSummary {
    pub fn percentages(&self) -> [f64; 8] {
        self.all.percentages(self.all.systems)
    }

    /// Table layout: a count row, a percentage row, then one row per
    /// confidence level.
    pub fn write_csv<W: Write>(&self, writer: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(COVERAGE_COLUMNS)?;
        let mut row = |label: &str, values: Vec<String>| {
            let mut r = vec![label.to_string()];
            r.extend(values);
            w.write_record(&r)
        };
        row("number", self.all.as_array().iter().map(usize::to_string).collect())?;
        row(
            "coverage_percent",
            self.percentages().iter().map(|p| format!("{p:.1}")).collect(),
        )?;
        for c in Confidence::ALL {
            let counts = self.by_confidence.get(&c).copied().unwrap_or_default();
            row(
                &c.label().to_ascii_lowercase(),
                counts.as_array().iter().map(usize::to_string).collect(),
            )?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_json(&self) -> serde_json::Value {
        let pct = self.percentages();
        let mut by_conf = serde_json::Map::new();
        for c in Confidence::ALL {
            let counts = self.by_confidence.get(&c).copied().unwrap_or_default();
            by_conf.insert(
                c.label().to_ascii_lowercase(),
                serde_json::to_value(counts).expect("serializable"),
            );
        }
        serde_json::json!({
            "number": self.all,
            "coverage_percent": COVERAGE_COLUMNS[1..]
                .iter()
                .zip(pct)
                .map(|(k, v)| (k.to_string(), serde_json::json!((v * 10.0).round() / 10.0)))
                .collect::<serde_json::Map<_, _>>(),
            "confidence": by_conf,
        })
    }
}

pub fn coverage_summary(systems: &[SystemRecord]) -> CoverageSummary {
    let mut summary = CoverageSummary::default();
    for c in Confidence::ALL {
        summary.by_confidence.insert(c, CoverageCounts::default());
    }
    for s in systems {
        summary.all.add(s);
        summary.by_confidence.entry(s.confidence).or_default().add(s);
    }
    summary
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExclusionReason {
    MultiHardware,
    InsufficientData,
}

impl ExclusionReason {
    pub fn as_str(self) -> &'static str {
        match self {
            ExclusionReason::MultiHardware => "multi-hardware",
            ExclusionReason::InsufficientData => "insufficient-data",
        }
    }
}

/// Splits systems into eligible and excluded, preserving input order within
/// each part. A single ambiguous name stays eligible.
pub fn eligible_systems(
    systems: &[SystemRecord],
) -> (Vec<SystemRecord>, Vec<(SystemRecord, ExclusionReason)>) {
    let mut eligible = Vec::new();
    let mut excluded = Vec::new();
    for s in systems {
        if s.distinct_hardware().len() > 1 {
            excluded.push((s.clone(), ExclusionReason::MultiHardware));
        } else if !s.has_direct_inputs() && !s.has_flop_inputs() {
            excluded.push((s.clone(), ExclusionReason::InsufficientData));
        } else {
            eligible.push(s.clone());
        }
    }
    (eligible, excluded)
}
