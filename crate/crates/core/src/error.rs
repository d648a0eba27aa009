use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FieldError {
    #[error("field magnitude must be positive, got {0}")]
    NonPositiveMagnitude(f64),
    #[error("axis vector has zero or non-finite length")]
    DegenerateAxis,
    #[error("cannot solve for a quadrupole: {0}")]
    Unsolvable(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ArrayError {
    #[error("site ({row}, {col}) outside a {rows}x{cols} grid")]
    SiteOutOfRange {
        row: usize,
        col: usize,
        rows: usize,
        cols: usize,
    },
    #[error("position ({x:e}, {y:e}) m lies outside the steerable tweezer window")]
    OutOfWindow { x: f64, y: f64 },
    #[error("temperature {temperature:e} K is not below the trap depth {depth:e} K; harmonic approximation invalid")]
    OutOfHarmonicRegime { temperature: f64, depth: f64 },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AssemblyError {
    #[error("move {source_site} -> {target}: direct path and both detours are blocked")]
    Unreachable { source_site: usize, target: usize },
    #[error("invalid move {source_site} -> {target}: {reason}")]
    InvalidMove {
        source_site: usize,
        target: usize,
        reason: &'static str,
    },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FitError {
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("fit did not converge: {0}")]
    NotConverged(String),
    #[error("empty input")]
    Empty,
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config parse error at `{path}`: {message}")]
    Parse { path: String, message: String },
    #[error("invalid config value at `{path}`: {message}")]
    Invalid { path: String, message: String },
    #[error("could not read config: {0}")]
    Io(#[from] std::io::Error),
}

impl ConfigError {
    pub(crate) fn invalid(path: &str, message: impl Into<String>) -> Self {
        Self::Invalid {
            path: path.to_string(),
            message: message.into(),
        }
    }
}

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("schema mismatch: {0}")]
    Schema(String),
    #[error("dataset contains no shot records")]
    Empty,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
