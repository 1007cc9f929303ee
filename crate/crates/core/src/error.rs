use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("non-positive {what} at step {step}, stock {stock}: {value}")]
    NonPositiveInput {
        what: &'static str,
        step: usize,
        stock: usize,
        value: f64,
    },
    #[error("time grid has {0} points, at least 2 are required")]
    GridTooShort(usize),
    #[error("invalid market panel: {0}")]
    InvalidPanel(String),
    #[error("missing data: {0}")]
    MissingData(String),
    #[error("derivative check failed for {what}[{index}]: analytic {analytic}, finite difference {numeric}")]
    DerivativeMismatch {
        what: &'static str,
        index: usize,
        analytic: f64,
        numeric: f64,
    },
    #[error("non-finite value at step {step}")]
    NumericalFailure { step: usize },
    #[error("generator is not balanced but the book path has jumps")]
    UnbalancedWithJumps,
    #[error("generator value {value} is not positive at step {step}")]
    NonPositiveG { step: usize, value: f64 },
    #[error("strategy wealth vanishes at step {step}")]
    ZeroWealth { step: usize },
    #[error("Gamma decreases by {drop} at step {step}")]
    NotMonotone { step: usize, drop: f64 },
    #[error("book jumps are not supported here")]
    JumpsNotSupported,
    #[error("market-to-book ratio {value} at step {step}, stock {stock} is outside [{lo}, {hi}]")]
    BoundsViolated {
        step: usize,
        stock: usize,
        value: f64,
        lo: f64,
        hi: f64,
    },
    #[error("relative book value {value} at step {step}, stock {stock} is below delta {delta}")]
    DeltaViolated {
        step: usize,
        stock: usize,
        value: f64,
        delta: f64,
    },
    #[error("rank weights sum to {0}, expected 1")]
    BadComposition(f64),
    #[error("invalid parameter: {0}")]
    BadParameter(String),
    #[error("unknown portfolio '{0}'")]
    UnknownPortfolio(String),
    #[error("weight rule requested step {requested} but only steps up to {available} are visible")]
    LookAheadViolation { requested: usize, available: usize },
    #[error("weights at step {step} sum to {sum}")]
    WeightSumError { step: usize, sum: f64 },
    #[error("market weight is zero for rank {0}")]
    DegenerateWeights(usize),
    #[error("length mismatch: {0}")]
    LengthMismatch(String),
    #[error("volatility matrix does not give a positive-definite covariance")]
    BadCovariance,
    #[error("io error: {0}")]
    Io(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("verification failed: {0}")]
    VerificationFailed(String),
}

impl Error {
    /// Stable machine-readable code, used by the command line front end.
    pub fn code(&self) -> &'static str {
        match self {
            Error::NonPositiveInput { .. } => "NonPositiveInput",
            Error::GridTooShort(_) => "GridTooShort",
            Error::InvalidPanel(_) => "InvalidPanel",
            Error::MissingData(_) => "MissingData",
            Error::DerivativeMismatch { .. } => "DerivativeMismatch",
            Error::NumericalFailure { .. } => "NumericalFailure",
            Error::UnbalancedWithJumps => "UnbalancedWithJumps",
            Error::NonPositiveG { .. } => "NonPositiveG",
            Error::ZeroWealth { .. } => "ZeroWealth",
            Error::NotMonotone { .. } => "NotMonotone",
            Error::JumpsNotSupported => "JumpsNotSupported",
            Error::BoundsViolated { .. } => "BoundsViolated",
            Error::DeltaViolated { .. } => "DeltaViolated",
            Error::BadComposition(_) => "BadComposition",
            Error::BadParameter(_) => "BadParameter",
            Error::UnknownPortfolio(_) => "UnknownPortfolio",
            Error::LookAheadViolation { .. } => "LookAheadViolation",
            Error::WeightSumError { .. } => "WeightSumError",
            Error::DegenerateWeights(_) => "DegenerateWeights",
            Error::LengthMismatch(_) => "LengthMismatch",
            Error::BadCovariance => "BadCovariance",
            Error::Io(_) => "Io",
            Error::Parse(_) => "Parse",
            Error::VerificationFailed(_) => "VerificationFailed",
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        if e.is_io_error() {
            Error::Io(e.to_string())
        } else {
            Error::Parse(e.to_string())
        }
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

impl From<toml::de::Error> for Error {
    fn from(e: toml::de::Error) -> Self {
        Error::Parse(e.to_string())
    }
}
