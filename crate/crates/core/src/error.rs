use thiserror::Error;

/// Errors raised by the model formulas and the simulation loop.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("wealth must be non-negative, got {0}")]
    NegativeWealth(f64),
    #[error("utility must lie in [0, 1), got {0}")]
    UtilityOutOfRange(f64),
    #[error("solvency percentile must lie strictly inside (0, 1), got {0}")]
    PercentileOutOfRange(f64),
    #[error("reserve per policy must be positive, got {0}")]
    ZeroReserve(f64),
    #[error("utility parameters must be strictly positive (scale {scale}, curvature {curvature})")]
    BadUtility { scale: f64, curvature: f64 },
    #[error("effects recorded for {effects} cannot be scored as {intervention}")]
    MismatchedEffects {
        intervention: &'static str,
        effects: &'static str,
    },
    #[error("{0} requires a non-empty input")]
    Empty(&'static str),
    #[error("invalid configuration: {0}")]
    Config(#[from] ConfigError),
}

/// Configuration problems; each names the offending key.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("`{key}` = {value} is outside the legal range {legal}")]
    OutOfRange {
        key: String,
        value: String,
        legal: String,
    },
    #[error("`{key}`: lower bound {lo} exceeds upper bound {hi}")]
    InvertedInterval { key: String, lo: f64, hi: f64 },
    #[error("could not parse scenario: {0}")]
    Parse(String),
    #[error("could not read {path}: {message}")]
    Io { path: String, message: String },
}

/// Errors surfaced by file persistence and the command line.
#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    File {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("csv output failed: {0}")]
    Csv(#[from] csv::Error),
    #[error("malformed q-table file: {0}")]
    QTable(String),
    #[error("q-table was trained on a different scenario (fingerprint {found}, expected {expected})")]
    FingerprintMismatch { expected: String, found: String },
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Model(#[from] ModelError),
}
