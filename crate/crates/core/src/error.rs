use std::path::PathBuf;

/// Errors raised by schedule construction, rate estimation and the CLI.
///
/// Variants split into validation failures (bad inputs, exit code 2) and
/// runtime failures (I/O, parse errors on files, numerical breakdown, exit code 1).
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid rate table: {0}")]
    InvalidRateTable(String),

    #[error("invalid noise schedule: {0}")]
    InvalidSchedule(String),

    #[error("rate function integrates to zero over [{alpha_min}, {alpha_max}]")]
    ZeroRate { alpha_min: f64, alpha_max: f64 },

    #[error("unknown name `{0}`")]
    UnknownName(String),

    #[error("singular covariance: {0}")]
    SingularCovariance(String),

    #[error("predictor failed: {0}")]
    Predictor(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidArgument(_)
                | Error::InvalidRateTable(_)
                | Error::InvalidSchedule(_)
                | Error::ZeroRate { .. }
                | Error::UnknownName(_)
        )
    }

    /// Process exit code for this error: 2 for validation, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        if self.is_validation() {
            2
        } else {
            1
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

macro_rules! invalid {
    ($($arg:tt)*) => {
        $crate::error::Error::InvalidArgument(format!($($arg)*))
    };
}
pub(crate) use invalid;
