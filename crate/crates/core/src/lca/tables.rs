//! Configuration tables for the impact model: factors, constants, server
//! profiles and electricity mixes.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ImpactVector;
use crate::catalog::{CardSegment, CardSpec, NormalizedName};
use crate::error::LcaError;

const DEFAULT_FACTORS: &str = include_str!("../../data/factors.json");
const DEFAULT_CONSTANTS: &str = include_str!("../../data/constants.json");
const DEFAULT_PROFILES: &str = include_str!("../../data/server_profiles.json");
const DEFAULT_MIXES: &str = include_str!("../../data/mixes.csv");

/// Code of the world-average pseudo-country.
pub const WORLD: &str = "WLD";

fn read(path: &Path) -> Result<String, LcaError> {
    std::fs::read_to_string(path).map_err(|e| LcaError::BadTable {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

fn bad_table(path: &Path, message: impl ToString) -> LcaError {
    LcaError::BadTable {
        path: path.to_path_buf(),
        message: message.to_string(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct SourcedVector {
    energy_kwh: f64,
    gwp_kg: f64,
    adpe_kgsb: f64,
    source: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct RawFactors {
    version: String,
    logic_per_cm2: SourcedVector,
    memory_per_gb: SourcedVector,
    board_base: SourcedVector,
    cpu_production: SourcedVector,
}

/// Linear production-impact model: per cm² of die, per GB of memory, a
/// fixed per-card base, and one CPU.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImpactFactors {
    pub version: String,
    pub logic_per_cm2: ImpactVector,
    pub memory_per_gb: ImpactVector,
    pub board_base: ImpactVector,
    pub cpu_production: ImpactVector,
    pub sources: BTreeMap<String, String>,
}

impl ImpactFactors {
    pub fn from_json_str(json: &str, label: &Path) -> Result<Self, LcaError> {
        let raw: RawFactors = serde_json::from_str(json).map_err(|e| bad_table(label, e))?;
        let mut sources = BTreeMap::new();
        let mut take = |key: &str, v: SourcedVector| -> Result<ImpactVector, LcaError> {
            let iv = ImpactVector::new(v.energy_kwh, v.gwp_kg, v.adpe_kgsb);
            if !iv.is_non_negative() {
                return Err(bad_table(label, format!("{key} has a negative component")));
            }
            sources.insert(key.to_string(), v.source);
            Ok(iv)
        };
        Ok(ImpactFactors {
            logic_per_cm2: take("logic_per_cm2", raw.logic_per_cm2)?,
            memory_per_gb: take("memory_per_gb", raw.memory_per_gb)?,
            board_base: take("board_base", raw.board_base)?,
            cpu_production: take("cpu_production", raw.cpu_production)?,
            version: raw.version,
            sources,
        })
    }

    pub fn load(path: &Path) -> Result<Self, LcaError> {
        Self::from_json_str(&read(path)?, path)
    }

    pub fn zero() -> Self {
        ImpactFactors {
            version: "zero".into(),
            logic_per_cm2: ImpactVector::zero(),
            memory_per_gb: ImpactVector::zero(),
            board_base: ImpactVector::zero(),
            cpu_production: ImpactVector::zero(),
            sources: BTreeMap::new(),
        }
    }
}

impl Default for ImpactFactors {
    fn default() -> Self {
        Self::from_json_str(DEFAULT_FACTORS, Path::new("factors.json")).expect("bundled factors are valid")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LcaConstants {
    pub pue: f64,
    pub lifespan_hours: f64,
    pub avg_lifetime_utilization: f64,
    pub training_usage: f64,
}

#[derive(Deserialize)]
struct Sourced {
    value: f64,
    #[allow(dead_code)]
    source: String,
}

#[derive(Deserialize)]
struct RawConstants {
    pue: Sourced,
    lifespan_hours: Sourced,
    avg_lifetime_utilization: Sourced,
    training_usage: Sourced,
}

impl LcaConstants {
    pub fn validate(&self) -> Result<(), LcaError> {
        let check = |name: &'static str, value: f64, ok: bool, rule: &'static str| {
            if ok {
                Ok(())
            } else {
                Err(LcaError::BadConstant { name, value, rule })
            }
        };
        check("pue", self.pue, self.pue >= 1.0 && self.pue.is_finite(), "must be >= 1")?;
        check(
            "lifespan_hours",
            self.lifespan_hours,
            self.lifespan_hours > 0.0 && self.lifespan_hours.is_finite(),
            "must be > 0",
        )?;
        let fraction = |v: f64| v > 0.0 && v <= 1.0;
        check(
            "avg_lifetime_utilization",
            self.avg_lifetime_utilization,
            fraction(self.avg_lifetime_utilization),
            "must be in (0, 1]",
        )?;
        check(
            "training_usage",
            self.training_usage,
            fraction(self.training_usage),
            "must be in (0, 1]",
        )
    }

    pub fn from_json_str(json: &str, label: &Path) -> Result<Self, LcaError> {
        let raw: RawConstants = serde_json::from_str(json).map_err(|e| bad_table(label, e))?;
        let c = LcaConstants {
            pue: raw.pue.value,
            lifespan_hours: raw.lifespan_hours.value,
            avg_lifetime_utilization: raw.avg_lifetime_utilization.value,
            training_usage: raw.training_usage.value,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self, LcaError> {
        Self::from_json_str(&read(path)?, path)
    }

    /// Device-hours an item is in service over its life.
    pub fn active_lifetime_hours(&self) -> f64 {
        self.lifespan_hours * self.avg_lifetime_utilization
    }
}

impl Default for LcaConstants {
    fn default() -> Self {
        Self::from_json_str(DEFAULT_CONSTANTS, Path::new("constants.json"))
            .expect("bundled constants are valid")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ServerProfile {
    pub gpus_per_server: u32,
    pub cpus_per_server: u32,
    pub cpu_tdp_w: f64,
}

impl ServerProfile {
    pub fn validate(&self) -> Result<(), LcaError> {
        if self.gpus_per_server == 0 {
            return Err(LcaError::NonPositive("gpus_per_server", 0.0));
        }
        if self.cpus_per_server == 0 {
            return Err(LcaError::NonPositive("cpus_per_server", 0.0));
        }
        if !(self.cpu_tdp_w > 0.0 && self.cpu_tdp_w.is_finite()) {
            return Err(LcaError::NonPositive("cpu_tdp_w", self.cpu_tdp_w));
        }
        Ok(())
    }

    /// CPUs attributed to one card.
    pub fn cpus_per_gpu(&self) -> f64 {
        f64::from(self.cpus_per_server) / f64::from(self.gpus_per_server)
    }
}

#[derive(Deserialize)]
struct RawProfile {
    gpus_per_server: u32,
    cpus_per_server: u32,
    cpu_tdp_w: f64,
}

#[derive(Deserialize)]
struct RawFamilyProfile {
    family: String,
    gpus_per_server: u32,
    cpus_per_server: u32,
    cpu_tdp_w: f64,
}

#[derive(Deserialize)]
struct RawProfiles {
    workstation: RawProfile,
    consumer: RawProfile,
    accelerator: RawProfile,
    #[serde(default)]
    by_family: Vec<RawFamilyProfile>,
}

/// Server layout per card segment, with per-family exceptions.
#[derive(Debug, Clone, PartialEq)]
pub struct ServerProfiles {
    pub workstation: ServerProfile,
    pub consumer: ServerProfile,
    pub accelerator: ServerProfile,
    by_family: Vec<(NormalizedName, ServerProfile)>,
}

impl ServerProfiles {
    pub fn uniform(profile: ServerProfile) -> Self {
        ServerProfiles {
            workstation: profile,
            consumer: profile,
            accelerator: profile,
            by_family: Vec::new(),
        }
    }

    pub fn with_family(mut self, family: &str, profile: ServerProfile) -> Self {
        self.by_family.push((NormalizedName::new(family), profile));
        self
    }

    pub fn from_json_str(json: &str, label: &Path) -> Result<Self, LcaError> {
        let raw: RawProfiles = serde_json::from_str(json).map_err(|e| bad_table(label, e))?;
        let conv = |p: RawProfile| ServerProfile {
            gpus_per_server: p.gpus_per_server,
            cpus_per_server: p.cpus_per_server,
            cpu_tdp_w: p.cpu_tdp_w,
        };
        let mut out = ServerProfiles {
            workstation: conv(raw.workstation),
            consumer: conv(raw.consumer),
            accelerator: conv(raw.accelerator),
            by_family: Vec::new(),
        };
        for f in raw.by_family {
            out = out.with_family(
                &f.family,
                ServerProfile {
                    gpus_per_server: f.gpus_per_server,
                    cpus_per_server: f.cpus_per_server,
                    cpu_tdp_w: f.cpu_tdp_w,
                },
            );
        }
        for p in [&out.workstation, &out.consumer, &out.accelerator]
            .into_iter()
            .chain(out.by_family.iter().map(|(_, p)| p))
        {
            p.validate()?;
        }
        Ok(out)
    }

    pub fn load(path: &Path) -> Result<Self, LcaError> {
        Self::from_json_str(&read(path)?, path)
    }

    pub fn profile_for(&self, card: &CardSpec) -> ServerProfile {
        let name = card.normalized_name();
        if let Some((_, p)) = self
            .by_family
            .iter()
            .find(|(fam, _)| fam.matches_exactly(&name) || fam.is_family_of(&name))
        {
            return *p;
        }
        match card.segment {
            CardSegment::Workstation => self.workstation,
            CardSegment::Consumer => self.consumer,
            CardSegment::Accelerator => self.accelerator,
        }
    }
}

impl Default for ServerProfiles {
    fn default() -> Self {
        Self::from_json_str(DEFAULT_PROFILES, Path::new("server_profiles.json"))
            .expect("bundled server profiles are valid")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElectricityMix {
    pub country: String,
    pub carbon_intensity_g_per_kwh: f64,
    pub adpe_kgsb_per_kwh: f64,
}

pub const MIX_COLUMNS: [&str; 3] = ["country", "carbon_intensity_g_per_kwh", "adpe_kgsb_per_kwh"];

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MixTable {
    mixes: BTreeMap<String, ElectricityMix>,
}

impl MixTable {
    pub fn from_mixes(mixes: impl IntoIterator<Item = ElectricityMix>) -> Self {
        MixTable {
            mixes: mixes.into_iter().map(|m| (m.country.clone(), m)).collect(),
        }
    }

    pub fn parse_reader<R: Read>(reader: R, label: &Path) -> Result<Self, LcaError> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let header: Vec<String> = rdr
            .headers()
            .map_err(|e| bad_table(label, e))?
            .iter()
            .map(str::to_string)
            .collect();
        if header != MIX_COLUMNS {
            return Err(bad_table(
                label,
                format!("expected header `{}`, found `{}`", MIX_COLUMNS.join(","), header.join(",")),
            ));
        }
        let mut mixes = BTreeMap::new();
        for rec in rdr.deserialize::<ElectricityMix>() {
            let m = rec.map_err(|e| bad_table(label, e))?;
            if !(m.carbon_intensity_g_per_kwh >= 0.0 && m.adpe_kgsb_per_kwh >= 0.0) {
                return Err(bad_table(label, format!("negative intensity for {}", m.country)));
            }
            mixes.insert(m.country.clone(), m);
        }
        Ok(MixTable { mixes })
    }

    pub fn load(path: &Path) -> Result<Self, LcaError> {
        let file = File::open(path).map_err(|e| bad_table(path, e))?;
        Self::parse_reader(file, path)
    }

    pub fn get(&self, country: &str) -> Result<&ElectricityMix, LcaError> {
        self.mixes
            .get(country)
            .ok_or_else(|| LcaError::UnknownCountry(country.to_string()))
    }

    pub fn len(&self) -> usize {
        self.mixes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mixes.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &ElectricityMix> {
        self.mixes.values()
    }
}

/// The bundled country mixes.
pub fn bundled_mixes() -> MixTable {
    MixTable::parse_reader(DEFAULT_MIXES.as_bytes(), Path::new("mixes.csv")).expect("bundled mixes are valid")
}
