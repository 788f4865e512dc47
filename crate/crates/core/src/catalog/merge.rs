//! Cross-validation of two card tables and reconciliation through a
//! datasheet override table.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::Read;
use std::path::Path;
use std::str::FromStr;

use chrono::NaiveDate;
use serde::Serialize;

use super::{parse_date, CardSpec, NormalizedName};
use crate::error::CatalogError;

/// Release dates closer than this are treated as equal (announcement vs
/// availability).
pub const DATE_TOLERANCE_DAYS: i64 = 30;
const REL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum OverrideField {
    ReleaseDate,
    DieArea,
    ProcessNode,
    MemorySize,
    Tdp,
    PeakFp64,
    PeakFp32,
    PeakFp16,
    PeakTensor,
}

impl OverrideField {
    /// Fields compared during cross-validation.
    pub const COMPARED: [OverrideField; 5] = [
        OverrideField::DieArea,
        OverrideField::ProcessNode,
        OverrideField::MemorySize,
        OverrideField::Tdp,
        OverrideField::ReleaseDate,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            OverrideField::ReleaseDate => "release_date",
            OverrideField::DieArea => "die_area_mm2",
            OverrideField::ProcessNode => "process_node_nm",
            OverrideField::MemorySize => "memory_gb",
            OverrideField::Tdp => "tdp_w",
            OverrideField::PeakFp64 => "peak_fp64",
            OverrideField::PeakFp32 => "peak_fp32",
            OverrideField::PeakFp16 => "peak_fp16",
            OverrideField::PeakTensor => "peak_tensor",
        }
    }

    fn numeric_slot(self, card: &mut CardSpec) -> Option<&mut Option<f64>> {
        match self {
            OverrideField::ReleaseDate => None,
            OverrideField::DieArea => Some(&mut card.die_area_mm2),
            OverrideField::ProcessNode => Some(&mut card.process_node_nm),
            OverrideField::MemorySize => Some(&mut card.memory_gb),
            OverrideField::Tdp => Some(&mut card.tdp_w),
            OverrideField::PeakFp64 => Some(&mut card.peak.fp64),
            OverrideField::PeakFp32 => Some(&mut card.peak.fp32),
            OverrideField::PeakFp16 => Some(&mut card.peak.fp16),
            OverrideField::PeakTensor => Some(&mut card.peak.tensor),
        }
    }

    fn numeric(self, card: &CardSpec) -> Option<f64> {
        let mut c = card.clone();
        self.numeric_slot(&mut c).and_then(|v| *v)
    }
}

impl FromStr for OverrideField {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let all = [
            OverrideField::ReleaseDate,
            OverrideField::DieArea,
            OverrideField::ProcessNode,
            OverrideField::MemorySize,
            OverrideField::Tdp,
            OverrideField::PeakFp64,
            OverrideField::PeakFp32,
            OverrideField::PeakFp16,
            OverrideField::PeakTensor,
        ];
        let s = s.trim();
        all.into_iter()
            .find(|f| f.as_str() == s)
            .or(match s {
                "die_area" => Some(OverrideField::DieArea),
                "process_node" => Some(OverrideField::ProcessNode),
                "memory_size" => Some(OverrideField::MemorySize),
                "tdp" => Some(OverrideField::Tdp),
                _ => None,
            })
            .ok_or(())
    }
}

#[derive(Debug, Clone, PartialEq)]
enum OverrideValue {
    Number(f64),
    Date(NaiveDate),
}

impl OverrideValue {
    fn render(&self) -> String {
        match self {
            OverrideValue::Number(x) => x.to_string(),
            OverrideValue::Date(d) => d.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Override {
    pub name: String,
    pub field: OverrideField,
    value: OverrideValue,
}

impl Override {
    pub fn new(name: &str, field: &str, value: &str) -> Result<Self, CatalogError> {
        let parsed_field = field
            .parse::<OverrideField>()
            .map_err(|_| CatalogError::UnknownOverrideField {
                card: name.to_string(),
                field: field.to_string(),
            })?;
        let bad = || CatalogError::BadOverrideValue {
            card: name.to_string(),
            field: field.to_string(),
            value: value.to_string(),
        };
        let value = if parsed_field == OverrideField::ReleaseDate {
            OverrideValue::Date(parse_date(value).map_err(|_| bad())?)
        } else {
            let v: f64 = value.trim().parse().map_err(|_| bad())?;
            if !(v.is_finite() && v >= 0.0) {
                return Err(bad());
            }
            OverrideValue::Number(v)
        };
        Ok(Override {
            name: name.to_string(),
            field: parsed_field,
            value,
        })
    }

    pub fn value_string(&self) -> String {
        self.value.render()
    }

    fn apply(&self, card: &mut CardSpec) {
        match self.value {
            OverrideValue::Date(d) => card.release_date = d,
            OverrideValue::Number(v) => {
                if let Some(slot) = self.field.numeric_slot(card) {
                    *slot = Some(v);
                }
            }
        }
    }
}

/// Datasheet values keyed by card name; the reference whenever the two
/// sources disagree.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct OverrideTable {
    pub entries: Vec<Override>,
}

impl OverrideTable {
    pub fn parse_reader<R: Read>(reader: R, label: &Path) -> Result<Self, CatalogError> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(reader);
        let csv_err = |source| CatalogError::Csv {
            path: label.to_path_buf(),
            source,
        };
        let header: Vec<String> = rdr.headers().map_err(csv_err)?.iter().map(str::to_string).collect();
        if header != ["name", "field", "value"] {
            return Err(CatalogError::UnknownSchema {
                path: label.to_path_buf(),
                expected: "name,field,value".into(),
                found: header.join(","),
            });
        }
        let mut entries = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(csv_err)?;
            entries.push(Override::new(&rec[0], &rec[1], &rec[2])?);
        }
        Ok(OverrideTable { entries })
    }

    pub fn load(path: &Path) -> Result<Self, CatalogError> {
        let file = File::open(path).map_err(|e| CatalogError::MissingFile {
            path: path.to_path_buf(),
            source: e,
        })?;
        Self::parse_reader(file, path)
    }

    fn find(&self, key: &str, field: OverrideField) -> Option<&Override> {
        // last entry wins when a card/field pair is repeated
        self.entries
            .iter()
            .rev()
            .find(|o| o.field == field && NormalizedName::new(&o.name).key() == key)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Resolution {
    DatasheetOverride,
    FlaggedUnresolved,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DivergentField {
    pub card: String,
    pub field: OverrideField,
    pub value_a: String,
    pub value_b: String,
    pub resolution: Resolution,
    /// The value kept in the merged catalog.
    pub merged: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct MergeReport {
    pub total_cards: usize,
    pub validated: usize,
    pub divergent: Vec<DivergentField>,
    pub divergent_cards: usize,
    pub single_source: usize,
    /// Normalized keys of the validated cards, sorted.
    pub validated_keys: Vec<String>,
}

fn numbers_equal(a: f64, b: f64) -> bool {
    (a - b).abs() <= REL_TOL * a.abs().max(b.abs())
}

fn render_num(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn fill_missing(into: &mut CardSpec, from: &CardSpec) {
    let pairs = [
        (&mut into.die_area_mm2, from.die_area_mm2),
        (&mut into.process_node_nm, from.process_node_nm),
        (&mut into.memory_gb, from.memory_gb),
        (&mut into.tdp_w, from.tdp_w),
        (&mut into.peak.fp64, from.peak.fp64),
        (&mut into.peak.fp32, from.peak.fp32),
        (&mut into.peak.fp16, from.peak.fp16),
        (&mut into.peak.tensor, from.peak.tensor),
    ];
    for (slot, other) in pairs {
        if slot.is_none() {
            *slot = other;
        }
    }
    if into.memory_type.is_none() {
        into.memory_type = from.memory_type.clone();
    }
}

/// Returns the value pair when the two cards disagree on `field`. Fields
/// absent on either side are not compared.
fn compare(field: OverrideField, a: &CardSpec, b: &CardSpec) -> Option<(String, String)> {
    if field == OverrideField::ReleaseDate {
        let gap = (a.release_date - b.release_date).num_days().abs();
        return (gap > DATE_TOLERANCE_DAYS)
            .then(|| (a.release_date.to_string(), b.release_date.to_string()));
    }
    match (field.numeric(a), field.numeric(b)) {
        (Some(x), Some(y)) if !numbers_equal(x, y) => Some((render_num(Some(x)), render_num(Some(y)))),
        _ => None,
    }
}

fn index_by_key(cards: &[CardSpec]) -> BTreeMap<String, &CardSpec> {
    let mut map = BTreeMap::new();
    for c in cards {
        map.entry(c.normalized_name().key()).or_insert(c);
    }
    map
}

/// Merges `a` and `b`. Output order is `a`'s order followed by the cards
/// only present in `b`. Where both sources hold a field and disagree, the
/// override table decides; without an override the value from `a` is kept
/// and the field is flagged.
pub fn merge_catalogs(
    a: &[CardSpec],
    b: &[CardSpec],
    overrides: &OverrideTable,
) -> Result<(Vec<CardSpec>, MergeReport), CatalogError> {
    let ia = index_by_key(a);
    let ib = index_by_key(b);
    for o in &overrides.entries {
        let key = NormalizedName::new(&o.name).key();
        if !ia.contains_key(&key) && !ib.contains_key(&key) {
            return Err(CatalogError::UnknownOverrideCard(o.name.clone()));
        }
    }

    let mut order: Vec<&String> = Vec::new();
    let mut seen = BTreeSet::new();
    for c in a.iter().chain(b) {
        let key = c.normalized_name().key();
        if seen.insert(key.clone()) {
            order.push(ia.get_key_value(&key).or_else(|| ib.get_key_value(&key)).unwrap().0);
        }
    }

    let mut report = MergeReport::default();
    let mut merged = Vec::with_capacity(order.len());
    for key in order {
        let (mut card, divergences) = match (ia.get(key), ib.get(key)) {
            (Some(ca), Some(cb)) => {
                let diffs: Vec<_> = OverrideField::COMPARED
                    .iter()
                    .filter_map(|&f| compare(f, ca, cb).map(|(va, vb)| (f, va, vb)))
                    .collect();
                let mut card = (*ca).clone();
                fill_missing(&mut card, cb);
                if diffs.is_empty() {
                    report.validated += 1;
                    report.validated_keys.push(key.clone());
                } else {
                    report.divergent_cards += 1;
                }
                (card, diffs)
            }
            (Some(c), None) | (None, Some(c)) => {
                report.single_source += 1;
                ((*c).clone(), Vec::new())
            }
            (None, None) => unreachable!("key collected from inputs"),
        };
        let mut touched = BTreeSet::new();
        for (field, value_a, value_b) in divergences {
            let (resolution, merged_value) = match overrides.find(key, field) {
                Some(o) => {
                    o.apply(&mut card);
                    (Resolution::DatasheetOverride, o.value_string())
                }
                None => (Resolution::FlaggedUnresolved, value_a.clone()),
            };
            touched.insert(field);
            report.divergent.push(DivergentField {
                card: card.name.clone(),
                field,
                value_a,
                value_b,
                resolution,
                merged: merged_value,
            });
        }
        for o in overrides
            .entries
            .iter()
            .filter(|o| !touched.contains(&o.field) && NormalizedName::new(&o.name).key() == *key)
        {
            o.apply(&mut card);
        }
        merged.push(card);
    }
    report.total_cards = merged.len();
    report.validated_keys.sort();
    Ok((merged, report))
}
