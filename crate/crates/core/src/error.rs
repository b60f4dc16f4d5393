use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid pmf: {0}")]
    InvalidPmf(String),
    #[error("invalid channel: {0}")]
    InvalidChannel(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("symbol {symbol} out of range for alphabet of size {size}")]
    Symbol { symbol: usize, size: usize },
    #[error("capacity iteration stopped after {iterations} steps with bounds [{lower}, {upper}]")]
    NoConvergence {
        lower: f64,
        upper: f64,
        iterations: usize,
        pmf: Vec<f64>,
    },
    #[error("budget exceeded: {0}")]
    Budget(String),
    #[error("invalid parameter: {0}")]
    Param(String),
    #[error("region kind `{0}` does not fit the supplied channel")]
    RegionKind(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("container error: {0}")]
    Container(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}
