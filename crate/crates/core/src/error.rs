use std::path::PathBuf;

/// Broad failure class, used by front ends to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ErrorKind {
    Config,
    Io,
    Schema,
    EmptyData,
    NumericDomain,
}

/// Errors returned by this crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A mandatory column is absent from the input header.
    #[error("missing mandatory column '{0}'")]
    MissingColumn(String),
    /// A parameter or configuration value is outside its domain.
    #[error("invalid parameter: {0}")]
    Parameter(String),
    /// The input contained no data rows.
    #[error("input contains no data rows")]
    EmptyInput,
    /// Forecasts and truth share no (location, target date) key.
    #[error("no forecast key overlaps the truth data")]
    EmptyAlignment,
    /// An empty series was handed to a reduction.
    #[error("empty series: {0}")]
    EmptySeries(&'static str),
    /// Pearson correlation undefined because a series has zero variance.
    #[error("correlation undefined: zero variance")]
    UndefinedCorrelation,
    /// A mean over matrix entries had nothing to average.
    #[error("undefined: {0}")]
    Undefined(&'static str),
    /// Baseline error is zero so the skill ratio is undefined.
    #[error("skill undefined: baseline error is zero")]
    UndefinedSkill,
    /// Input value lies outside the range an inversion is defined on.
    #[error("value {value} outside [{lower}, {upper}]")]
    OutOfRange { value: f64, lower: f64, upper: f64 },
    /// Too few common dates for an estimator.
    #[error("insufficient overlap: need at least {needed} common dates, found {found}")]
    InsufficientOverlap { needed: usize, found: usize },
    /// The strategy needs more models than are available.
    #[error("strategy needs at least {needed} models, found {found}")]
    InsufficientModels { needed: usize, found: usize },
    /// The covariance matrix could not be factored.
    #[error("covariance matrix is singular; retry with shrinkage > 0")]
    SingularCovariance,
    /// No model has the pairwise entries needed for clustering.
    #[error("cannot cluster: correlation matrix has no usable entries")]
    CannotCluster,
    /// Decomposition undefined because the ensemble residual has zero variance.
    #[error("decomposition undefined: ensemble residual has zero variance")]
    UndefinedDecomposition,
    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Parameter(_) => ErrorKind::Config,
            Error::File { .. } | Error::Io(_) => ErrorKind::Io,
            Error::MissingColumn(_) | Error::Csv(_) | Error::Json(_) => ErrorKind::Schema,
            Error::EmptyInput
            | Error::EmptyAlignment
            | Error::EmptySeries(_)
            | Error::InsufficientOverlap { .. }
            | Error::InsufficientModels { .. }
            | Error::CannotCluster => ErrorKind::EmptyData,
            Error::UndefinedCorrelation
            | Error::Undefined(_)
            | Error::UndefinedSkill
            | Error::OutOfRange { .. }
            | Error::SingularCovariance
            | Error::UndefinedDecomposition => ErrorKind::NumericDomain,
        }
    }

    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
