use std::path::PathBuf;

use thiserror::Error;

/// Top-level error. Every variant carries the module that raised it so the
/// CLI can attribute failures.
#[derive(Debug, Error)]
pub enum Error {
    #[error("catalog: {0}")]
    Catalog(#[from] CatalogError),
    #[error("systems: {0}")]
    Systems(#[from] SystemsError),
    #[error("estimation: {0}")]
    Estimation(#[from] EstimationError),
    #[error("lca: {0}")]
    Lca(#[from] LcaError),
    #[error("stats: {0}")]
    Stats(#[from] StatsError),
    #[error("config: {0}")]
    Config(#[from] ConfigError),
    #[error("io: {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn module(&self) -> &'static str {
        match self {
            Error::Catalog(_) => "catalog",
            Error::Systems(_) => "systems",
            Error::Estimation(_) => "estimation",
            Error::Lca(_) => "lca",
            Error::Stats(_) => "stats",
            Error::Config(_) => "config",
            Error::Io { .. } => "io",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// A rejected input row. Line numbers are 1-based and count the header.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("line {line}: {message}")]
pub struct RowError {
    pub line: u64,
    pub message: String,
}

#[derive(Debug, Error)]
pub enum CatalogError {
    #[error("cannot open card table {path}: {source}")]
    MissingFile {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: unknown schema, expected header `{expected}`, found `{found}`")]
    UnknownSchema {
        path: PathBuf,
        expected: String,
        found: String,
    },
    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("override references unknown card `{0}`")]
    UnknownOverrideCard(String),
    #[error("override for `{card}` references unknown field `{field}`")]
    UnknownOverrideField { card: String, field: String },
    #[error("override for `{card}`.{field}: cannot parse `{value}`")]
    BadOverrideValue {
        card: String,
        field: String,
        value: String,
    },
    #[error("no card matches `{0}`")]
    UnresolvedName(String),
    #[error("card catalog is empty")]
    EmptyCatalog,
    #[error("unknown field selector `{0}`")]
    UnknownField(String),
    #[error("{path}: invalid plausibility mapping: {message}")]
    BadPlausibility { path: PathBuf, message: String },
}

#[derive(Debug, Error)]
pub enum SystemsError {
    #[error("cannot open systems table {path}: {source}")]
    MissingFile {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: header lacks required column for `{field}`")]
    MissingColumn { path: PathBuf, field: String },
    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("column mapping {path}: {message}")]
    BadMapping { path: PathBuf, message: String },
}

#[derive(Debug, Error)]
pub enum EstimationError {
    #[error("{0} must be positive, got {1}")]
    NonPositive(&'static str, f64),
    #[error("card `{0}` has no usable fp32/fp16/tensor peak")]
    NoUsablePeak(String),
    #[error("bridge fit needs at least 3 pairs, got {0}")]
    TooFewPairs(usize),
    #[error("no estimator applies to system `{0}`")]
    NoEstimator(String),
    #[error("system `{0}` needs a resolved card for a FLOP-based estimate")]
    MissingCard(String),
    #[error("bridge correction requested but no bridge model available")]
    MissingBridge,
    #[error(transparent)]
    Stats(#[from] StatsError),
}

#[derive(Debug, Error)]
pub enum LcaError {
    #[error("card `{card}` lacks {missing}; cannot estimate")]
    CannotEstimate { card: String, missing: &'static str },
    #[error("{0} must be positive, got {1}")]
    NonPositive(&'static str, f64),
    #[error("{0} must be non-negative, got {1}")]
    Negative(&'static str, f64),
    #[error("unknown country `{0}`")]
    UnknownCountry(String),
    #[error("{path}: {message}")]
    BadTable { path: PathBuf, message: String },
    #[error("invalid constant {name} = {value}: {rule}")]
    BadConstant {
        name: &'static str,
        value: f64,
        rule: &'static str,
    },
}

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("need at least {min} observations, got {got}")]
    TooFew { min: usize, got: usize },
    #[error("sample size {0} outside supported range 3..=5000")]
    SampleSize(usize),
    #[error("predictor has zero variance")]
    DegeneratePredictor,
    #[error("sample is constant")]
    ConstantSample,
    #[error("weights must be positive and finite")]
    BadWeights,
    #[error("residuals are all zero")]
    ZeroResiduals,
    #[error("non-finite input")]
    NonFinite,
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("referenced file does not exist: {0}")]
    MissingPath(PathBuf),
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("{0}")]
    Invalid(String),
    #[error("no systems released in or after {0}")]
    NoPostBaselineSystems(i32),
}
