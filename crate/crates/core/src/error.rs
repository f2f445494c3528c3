use thiserror::Error;

/// Errors produced by the library. Variants map one-to-one onto the failure
/// modes of the individual operations.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("width {width} exceeds the enumeration cap of {cap}")]
    CapExceeded { width: usize, cap: usize },

    #[error("invalid width {0}")]
    InvalidWidth(usize),

    #[error("state index {index} out of range for width {width}")]
    StateOutOfRange { index: usize, width: usize },

    #[error("width mismatch: {left} vs {right}")]
    WidthMismatch { left: usize, right: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("cylinder fixes values outside its mask")]
    InvalidCylinder,

    #[error("star center is not contained in its cylinder")]
    CenterNotInCylinder,

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("distributions have disjoint supports")]
    DisjointSupports,

    #[error("input state {0} has zero marginal mass")]
    ZeroInputMass(usize),

    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("support class parameter d={d} outside [0, {max}]")]
    InvalidSupportClass { d: usize, max: usize },

    #[error("sharing step normalizer degenerated")]
    DegenerateStep,

    #[error("invalid sharing step: {0}")]
    InvalidStep(String),

    #[error("mixture weight lambda = 0 cannot be realized by a finite hidden unit")]
    LambdaZero,

    #[error("hidden-unit bias {0} exceeds the magnitude cap")]
    BiasOutOfRange(f64),

    #[error("mixture weights infeasible: {0}")]
    InfeasibleProfile(String),

    #[error("depth r={r} infeasible for k={k} (needs k >= {needed})")]
    InfeasibleDepth { k: usize, r: usize, needed: usize },

    #[error("tolerance {eps} not reached up to sharpness {tau_max}")]
    BudgetExceeded { eps: f64, tau_max: f64 },

    #[error("target support of size {support} exceeds 2^k + d = {limit}")]
    SupportTooLarge { support: usize, limit: usize },

    #[error("rows do not share a common support")]
    SupportsDiffer,

    #[error("row {0} is not constant on the partition blocks")]
    NotBlockConstant(usize),

    #[error("exact code search limited to length {cap}, got {n}")]
    TooLarge { n: usize, cap: usize },

    #[error("numeric rank unstable: {low} / {mid} / {high} at thresholds tol/2, tol, 2 tol")]
    UnstableRank { low: usize, mid: usize, high: usize },

    #[error("not a simplicial complex: {0}")]
    NotSimplicialComplex(String),

    #[error("kept complex is not contained in the interaction complex")]
    NotSubcomplex,

    #[error("no bracket for interaction {rho} up to scale {t_max}")]
    NoBracket { rho: f64, t_max: f64 },

    #[error("hidden-unit budget mismatch: expected {expected}, used {used}")]
    BudgetMismatch { expected: usize, used: usize },

    #[error("threshold tie at layer {layer}, unit {unit}")]
    TieEncountered { layer: usize, unit: usize },

    #[error("threshold network is not generic")]
    NotGeneric,

    #[error("scale {0} exceeded without reaching the tolerance")]
    ScaleCapExceeded(f64),

    #[error("io: {0}")]
    Io(String),

    #[error("parse: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Parse(e.to_string())
    }
}
