use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("no headline records fall inside {0}")]
    EmptyCorpus(String),
    #[error("decay rate must be non-negative, got {0}")]
    InvalidDecay(f64),
    #[error("decay reference date {as_of} precedes the end of the range {end}")]
    DecayReference { as_of: String, end: String },
    #[error("parse error in {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("window {0} does not intersect the panel dates")]
    EmptyWindow(String),
    #[error("selected weights touch only empty documents (zero term mass)")]
    ZeroMass,
    #[error("normalisation vocabulary size must be at least 2 and cover the realised support, got m={m} for support {support}")]
    DegenerateVocab { m: usize, support: usize },
    #[error("risk boost factor must exceed 1, got {0}")]
    InvalidGamma(f64),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid weights: {0}")]
    InvalidWeights(String),
    #[error("zero volatility in {0}")]
    ZeroVolatility(&'static str),
    #[error("zero denominator in {0}")]
    ZeroDenominator(&'static str),
    #[error("series mean is zero")]
    ZeroMean,
    #[error("conditional dependence denominator is zero")]
    DegenerateDenominator,
    #[error("series is constant")]
    ConstantSeries,
    #[error("regressor is constant")]
    ConstantRegressor,
    #[error("invalid Dirichlet concentration: {0}")]
    InvalidAlpha(String),
    #[error("return target {target} exceeds the best asset mean {best}")]
    Infeasible { target: f64, best: f64 },
    #[error("no return target admits a feasible portfolio")]
    AllInfeasible,
    #[error("window plan produces no windows: {0}")]
    NoWindows(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    /// An earlier failure carried as text.
    #[error("{0}")]
    Reported(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn parse(path: impl Into<PathBuf>, message: impl ToString) -> Self {
        Error::Parse {
            path: path.into(),
            message: message.to_string(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
