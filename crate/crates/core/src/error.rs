use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("surface left the radial-graph chart: {0}")]
    NonGraphical(String),
    #[error("invalid time: {0}")]
    InvalidTime(String),
    #[error("step rejected at time {time}: {reason}")]
    StepRejected { time: f64, reason: String },
    #[error("{source} (at time {time})")]
    AtTime {
        time: f64,
        #[source]
        source: Box<Error>,
    },
    #[error("quadrature underresolved: strip covers |y| <= {coverage}, need {required}")]
    QuadratureUnderresolved { coverage: f64, required: f64 },
    #[error("ball radius {radius} exceeds strip coverage {coverage}")]
    BallExceedsStrip { radius: f64, coverage: f64 },
    #[error("zero distance in frequency ratio")]
    ZeroDistance,
    #[error("insufficient coverage: {0}")]
    InsufficientCoverage(String),
    #[error("sequence too short: {0}")]
    TooShort(String),
    #[error("graphicality lost: {0}")]
    LostGraphicality(String),
    #[error("degenerate fit: {0}")]
    DegenerateFit(String),
    #[error("hypothesis {condition} failed at T = {at}")]
    HypothesisFailed { condition: String, at: f64 },
    #[error("no sign change: both endpoints give {0}")]
    NoSignChange(String),
    #[error("chart exit: {0}")]
    ChartExit(String),
    #[error("time shift too large: e^tau |s| = {0} >= 1")]
    TimeShiftTooLarge(f64),
    #[error("mean convexity failed: {0}")]
    MeanConvexityFailed(String),
    #[error("barrier matching failed: {0}")]
    MatchingFailed(String),
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("validation failed: {}", .0.join("; "))]
    Validation(Vec<String>),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn at_time(self, time: f64) -> Error {
        match self {
            Error::AtTime { .. } => self,
            other => Error::AtTime {
                time,
                source: Box::new(other),
            },
        }
    }

    /// The innermost error, stripping time annotations.
    pub fn root(&self) -> &Error {
        match self {
            Error::AtTime { source, .. } => source.root(),
            other => other,
        }
    }

    /// Short machine-readable tag, used in run logs.
    pub fn kind(&self) -> &'static str {
        match self.root() {
            Error::NonGraphical(_) => "NonGraphical",
            Error::InvalidTime(_) => "InvalidTime",
            Error::StepRejected { .. } => "StepRejected",
            Error::AtTime { .. } => "AtTime",
            Error::QuadratureUnderresolved { .. } => "QuadratureUnderresolved",
            Error::BallExceedsStrip { .. } => "BallExceedsStrip",
            Error::ZeroDistance => "ZeroDistance",
            Error::InsufficientCoverage(_) => "InsufficientCoverage",
            Error::TooShort(_) => "TooShort",
            Error::LostGraphicality(_) => "LostGraphicality",
            Error::DegenerateFit(_) => "DegenerateFit",
            Error::HypothesisFailed { .. } => "HypothesisFailed",
            Error::NoSignChange(_) => "NoSignChange",
            Error::ChartExit(_) => "ChartExit",
            Error::TimeShiftTooLarge(_) => "TimeShiftTooLarge",
            Error::MeanConvexityFailed(_) => "MeanConvexityFailed",
            Error::MatchingFailed(_) => "MatchingFailed",
            Error::GridMismatch(_) => "GridMismatch",
            Error::InvalidInput(_) => "InvalidInput",
            Error::Parse { .. } => "ParseError",
            Error::Validation(_) => "ValidationError",
            Error::Io(_) => "Io",
            Error::Json(_) => "Json",
            Error::Csv(_) => "Csv",
        }
    }
}
