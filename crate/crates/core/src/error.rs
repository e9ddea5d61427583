use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("unknown function id `{0}`")]
    UnknownFunction(String),
    #[error("rank deficient: {distinct} distinct x values, need at least {needed}")]
    RankDeficient { distinct: usize, needed: usize },
    #[error("sample too small: n = {n}, need at least {min}")]
    SampleTooSmall { n: usize, min: usize },
    #[error("hat-matrix trace {trace} reaches sample size {n}")]
    DegenerateDenominator { trace: f64, n: usize },
    #[error("no bandwidth on the automatic grid yields a valid leave-one-out fit")]
    BandwidthTooSmall,
    #[error("non-finite prediction at x = {x}")]
    NonFinitePrediction { x: f64 },
    #[error("exhaustive plan needs {count} splits, cap is {cap}")]
    ExhaustiveTooLarge { count: u128, cap: u128 },
    #[error("every candidate procedure failed to fit")]
    AllProceduresFailed,
    #[error("procedure {index} ({label}) failed: {source}")]
    ProcedureFailed {
        index: usize,
        label: String,
        #[source]
        source: Box<Error>,
    },
    #[error("binomial coefficients overflow exact arithmetic for n = {n} (max 60)")]
    OverflowRisk { n: usize },
    #[error("risk estimate is zero; slope or ratio undefined")]
    DegenerateRisk,
    #[error("no rows for requested panel {0}")]
    EmptySelection(String),
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid specification: {0}")]
    InvalidSpec(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Io(e.to_string())
    }
}
