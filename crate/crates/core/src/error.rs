use thiserror::Error;

/// Errors raised by the reconstruction pipeline and the link simulator.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid band: need 0 <= omega0 < omega1 <= pi, got ({omega0}, {omega1})")]
    InvalidBand { omega0: f64, omega1: f64 },

    #[error("sample locations must be pairwise distinct (duplicate at {location})")]
    DuplicateLocation { location: f64 },

    #[error("sample set is inconsistent: {0}")]
    InvalidSamples(String),

    #[error("regularization must be finite and nonnegative, got {0}")]
    InvalidEpsilon(f64),

    #[error("ill-conditioned system: pivot {pivot} is {value}")]
    IllConditioned { pivot: usize, value: f64 },

    #[error("saturation too dense: {available} unsaturated samples, window needs {needed}")]
    DenseSaturation { available: usize, needed: usize },

    #[error("invalid stream: {0}")]
    InvalidStream(String),

    #[error("invalid window configuration: {0}")]
    InvalidWindow(String),

    #[error("offset pattern {0:?} is not a sorted set of distinct integers of the window length")]
    InvalidPattern(Vec<f64>),

    #[error("invalid OFDM configuration: {0}")]
    InvalidConfig(String),

    #[error("bit count {bits} is not a multiple of {per_symbol} bits per symbol")]
    BitCount { bits: usize, per_symbol: usize },

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("signal has zero power")]
    ZeroPower,

    #[error("empty input")]
    Empty,

    #[error("invalid channel response: {0}")]
    InvalidResponse(String),

    #[error("channel response is not invertible at carrier {carrier}")]
    NotInvertible { carrier: usize },

    #[error("invalid thresholds: t0 = {t0} must be below t1 = {t1}")]
    InvalidThresholds { t0: f64, t1: f64 },

    #[error("invalid sweep: {0}")]
    InvalidSweep(String),

    #[error("unknown preset `{name}` (available: {available})")]
    UnknownPreset { name: String, available: String },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("I/O error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
        match e.kind() {
            csv::ErrorKind::Io(_) => Error::Io(e.to_string()),
            _ => Error::Parse {
                line,
                message: e.to_string(),
            },
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
