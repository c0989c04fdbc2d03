use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// The arcsin argument of the steering equation left [-1, 1]: no main beam.
    #[error("frequency {freq_hz} Hz does not radiate a main beam (steering argument {argument:.4})")]
    OutOfScanRange { freq_hz: f64, argument: f64 },

    #[error("{} frequencies outside the scan range: {offenders:?}", offenders.len())]
    FrequenciesOutOfScanRange { offenders: Vec<f64> },

    #[error("query {value} is outside the field of view [{lo}, {hi}]")]
    OutOfFov { value: f64, lo: f64, hi: f64 },

    #[error("calibration row {row}: {message}")]
    CalibrationParse { row: usize, message: String },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("unsupported input: {0}")]
    Unsupported(String),

    #[error("invalid scenario: {}", .0.join("; "))]
    InvalidScenario(Vec<String>),

    #[error("no breathing detected (peak/median band power {peak_to_median:.2})")]
    NoBreathingDetected { peak_to_median: f64 },

    #[error("no valid estimates to classify")]
    Unclassifiable,

    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }

    /// True for errors caused by user-supplied configuration rather than
    /// runtime failures.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            Error::Config { .. } | Error::InvalidScenario(_) | Error::CalibrationParse { .. }
        )
    }
}
