use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("actuator {index}: {reason}")]
    InvalidActuator { index: usize, reason: String },
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),
    #[error("invalid feet: {0}")]
    InvalidFeet(String),
    #[error("invalid mass profile: {0}")]
    InvalidMassProfile(String),
    #[error("parameter {name} must be positive and finite, got {value}")]
    NonPositiveParameter { name: &'static str, value: f64 },
    #[error("robot has zero total mass")]
    ZeroMass,
    #[error("need at least 2 links per actuator, got {0}")]
    TooFewLinks(usize),
    #[error("voltage {voltage} V outside [0, {max}] V")]
    VoltageOutOfRange { voltage: f64, max: f64 },
    #[error("invalid drive: {0}")]
    InvalidDrive(String),
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("time step {dt} s exceeds the stability bound {dt_max} s")]
    StepTooLarge { dt: f64, dt_max: f64 },
    #[error("non-finite state at node {node}, t = {t} s")]
    NonFinite { node: usize, t: f64 },
    #[error("invalid simulation request: {0}")]
    InvalidRequest(String),
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("config syntax: {0}")]
    Parse(String),
    #[error("config section [{section}]: {msg}")]
    Section { section: String, msg: String },
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Error)]
pub enum TrajectoryIoError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("bad trajectory file: {0}")]
    Format(String),
}

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("trajectory too short: {have:.3} s available, {need:.3} s required")]
    TooShort { have: f64, need: f64 },
    #[error("no dominant period in the signal")]
    NoDominantPeriod,
    #[error("unresolved spectral peaks: found {found} of {wanted}")]
    UnresolvedPeaks { found: usize, wanted: usize },
    #[error("configuration halves have no feet")]
    NoFeet,
    #[error("calibration failed: {0}")]
    Calibration(String),
    #[error("sweep needs at least two frequencies")]
    TooFewFrequencies,
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Model(#[from] ModelError),
}
