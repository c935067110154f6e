use thiserror::Error;

/// Every failure the library reports. Variants map one-to-one onto the error
/// conditions of the individual operations; the FFI layer turns them into
/// stable integer codes.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("point {x} lies within 1e-14 of a partition endpoint")]
    PointOnPartitionBoundary { x: f64 },
    #[error("point {x} is outside the domain [{lo}, {hi}]")]
    OutsideDomain { x: f64, lo: f64, hi: f64 },
    #[error("value {y} is outside the image of branch {branch}")]
    OutsideImage { y: f64, branch: usize },
    #[error("no convergence: {0}")]
    NoConvergence(String),
    #[error("invalid gamma {0}")]
    InvalidGamma(f64),
    #[error("orbit did not return within {cap} steps")]
    ReturnCapExceeded { cap: u64 },
    #[error("ulam operator is reducible on its window: {0}")]
    Reducible(String),
    #[error("numerical accuracy loss: error estimate {estimate:e} exceeds {target:e}")]
    NumericalAccuracyLoss { estimate: f64, target: f64 },
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("argument {arg} is outside the available range")]
    OutOfRange { arg: f64 },
    #[error("degenerate fit window: {0}")]
    DegenerateWindow(String),
    #[error("laplace truncation too coarse for lambda = {lambda}")]
    TruncationTooCoarse { lambda: f64 },
    #[error("cylinder is empty")]
    EmptyCylinder,
    #[error("q_n fell below the 1e-14 precision floor at n = {n}")]
    PrecisionFloor { n: u64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}
