use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("target excursion [{low:.3}, {high:.3}] leaves the range window [0, {bins})")]
    Excursion { low: f64, high: f64, bins: usize },

    #[error("dimension mismatch: expected {expected:?}, found {found:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },

    #[error("radar configuration mismatch between operands")]
    ConfigMismatch,

    #[error("radargram contains a non-finite sample at scan {scan}, bin {bin}")]
    NonFiniteSample { scan: usize, bin: usize },

    #[error("no target found: radargram has no slow-time variation")]
    NoTarget,

    #[error("bin window {bin}±{half_width} falls outside [0, {bins})")]
    BinWindow {
        bin: usize,
        half_width: usize,
        bins: usize,
    },

    #[error("signal too short: {len} samples, need at least {min}")]
    SignalTooShort { len: usize, min: usize },

    #[error("signal has no in-band energy")]
    ZeroSignal,

    #[error("bad magic {found:?}, expected {expected:?}")]
    BadMagic { expected: [u8; 4], found: [u8; 4] },

    #[error("unsupported format version {found}, expected {expected}")]
    Version { expected: u16, found: u16 },

    #[error("truncated payload: expected {expected} bytes, found {found}")]
    Truncated { expected: u64, found: u64 },

    #[error("non-finite value in file at element {0}")]
    NonFiniteValue(usize),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("training diverged at epoch {epoch}: loss is not finite")]
    Diverged { epoch: usize },

    #[error("defense loss is not finite at iteration {iteration}")]
    NonFiniteLoss { iteration: usize },

    #[error("infeasible geometry: displacement {displacement_mm:.3} mm exceeds arm radius {arm_radius_mm:.3} mm")]
    InfeasibleGeometry {
        displacement_mm: f64,
        arm_radius_mm: f64,
    },

    #[error("servo limits violated: {0}")]
    ServoLimits(String),

    #[error("metrics: {0}")]
    Metrics(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    /// Process exit code for the CLI: 2 for data/validation, 3 for numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Diverged { .. } | Error::NonFiniteLoss { .. } => 3,
            _ => 2,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
