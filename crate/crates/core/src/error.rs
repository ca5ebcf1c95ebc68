use std::path::PathBuf;

use crate::netlist::Net;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),
    #[error("disconnected {0:?} net: {1} node(s) unreachable from the supply")]
    DisconnectedNet(Net, usize),
    #[error("negative resistance delta {0}")]
    NegativeDelta(f64),
    #[error("singular system: {0}")]
    SingularSystem(String),
    #[error("solver did not converge: relative residual {residual:e} exceeds {tolerance:e}")]
    NonConvergence { residual: f64, tolerance: f64 },
    #[error("invalid load: {0}")]
    InvalidLoad(String),
    #[error("invalid activation count {0} (expected 1..=32)")]
    InvalidCount(usize),
    #[error("level {level} is unachievable: {droop_mv:.2} mV exceeds the {margin_mv:.2} mV margin with no extra resistance")]
    UnachievableLevel { level: usize, droop_mv: f64, margin_mv: f64 },
    #[error("resistance must be positive, got {0}")]
    NonPositiveResistance(f64),
    #[error("performance undefined at zero NAPSAA")]
    ZeroNapsaa,
    #[error("run_active_time must be positive")]
    ZeroActiveTime,
    #[error("baseline EDP must be positive, got {0}")]
    NonPositiveBaseline(f64),
    #[error("initial NAPSAA is 0; nothing to age")]
    NoInitialLevel,
    #[error("calibration table: {0}")]
    Table(String),
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: `{key}` expects {expected}, got `{value}`")]
    TypeMismatch { line: usize, key: String, value: String, expected: &'static str },
    #[error("line {line}: malformed entry `{text}` (expected `key = value`)")]
    Syntax { line: usize, text: String },
    #[error("line {line}: workload file {} not found", path.display())]
    MissingWorkloadFile { line: usize, path: PathBuf },
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
}

pub type Result<T> = std::result::Result<T, Error>;
