use thiserror::Error;

/// Library-wide error type.
///
/// Variants are grouped by the layer that raises them; messages are written
/// so a CLI can print them verbatim. Numerical failures (non-SPD matrices,
/// singular covariances) are real errors here, never silently repaired:
/// no jitter is added anywhere in this crate.
#[derive(Debug, Error)]
pub enum Error {
    // Linear algebra and distribution parameters.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("input contains non-finite values")]
    NonFinite,
    #[error("matrix is not symmetric within tolerance")]
    NotSymmetric,
    #[error("matrix is not positive definite")]
    NotPositiveDefinite,
    #[error("degrees of freedom must be positive and finite, got {0}")]
    InvalidDof(f64),
    #[error("lambda must be nonnegative and finite, got {0}")]
    InvalidLambda(f64),
    #[error("posterior predictive requires lambda > 0, got {0}")]
    ZeroLambdaPredictive(f64),
    #[error("nu must exceed dimension - 1 ({min}), got {nu}")]
    InvalidNu { nu: f64, min: f64 },

    // Conjugate updates.
    #[error("empty observation set")]
    EmptyData,
    #[error("insufficient data for data-dependent prior")]
    InsufficientPriorData,
    #[error("degenerate scatter")]
    DegenerateScatter,
    #[error("class count must be at least 1, got {0}")]
    InvalidClassCount(usize),

    // Class catalogs and model fitting.
    #[error("catalog needs at least 2 classes, got {0}")]
    TooFewClasses(usize),
    #[error("duplicate class name {0:?}")]
    DuplicateClass(String),
    #[error("class name must be non-empty")]
    EmptyClassName,
    #[error("unknown label {0:?}")]
    UnknownLabel(String),
    #[error("class {0:?} has no training observations")]
    MissingClass(String),
    #[error("class {class:?} has {count} training observations, need at least 2")]
    TooFewClassObservations { class: String, count: usize },
    #[error("singular class covariance for class {0:?}")]
    SingularClassCovariance(String),
    #[error("singular pooled covariance")]
    SingularPooledCovariance,
    #[error("{total} observations across {classes} classes cannot support a pooled covariance")]
    InsufficientPooledData { total: usize, classes: usize },
    #[error("invalid alpha: {0}")]
    InvalidAlpha(String),
    #[error("class {class}: {source}")]
    ClassFit { class: String, source: Box<Error> },
    #[error("realization {index}: {source}")]
    RealizationFit { index: usize, source: Box<Error> },
    #[error("ensemble fitting supports qda and lda, got {0}")]
    InvalidEnsembleKind(String),
    #[error("ensemble has {models} models but cube has {realizations} realizations")]
    EnsembleSizeMismatch { models: usize, realizations: usize },
    #[error("invalid model file: {0}")]
    ModelFormat(String),
    #[error("model expects {model} bands but cube has {cube}")]
    BandMismatch { model: usize, cube: usize },

    // Data cubes.
    #[error("{path}:{line}: {msg}")]
    CubeFormat { path: String, line: usize, msg: String },
    #[error("{0}")]
    CubeStructure(String),
    #[error("pixel {pixel} has {found} of {expected} realizations")]
    IncompleteRealizations { pixel: u64, found: usize, expected: usize },
    #[error("pixel {0} is not labeled")]
    UnlabeledPixel(u64),
    #[error("realization index {given} out of range, cube has {count}")]
    RealizationOutOfRange { given: usize, count: usize },
    #[error("training fraction must lie strictly between 0 and 1, got {0}")]
    InvalidFraction(f64),
    #[error("cube has no labeled pixels")]
    NoLabeledPixels,
    #[error("AOD must be nonnegative and finite, got {0}")]
    InvalidAod(f64),
    #[error("invalid synthesis spec: {0}")]
    InvalidSynthSpec(String),

    // Metrics.
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("beta must be positive and finite, got {0}")]
    InvalidBeta(f64),
    #[error("invalid prior class distribution: {0}")]
    InvalidPrior(String),
    #[error("malformed probability table: {0}")]
    MalformedTable(String),
    #[error("data has zero variance")]
    ZeroVariance,
    #[error("requested {requested} components from {available} bands")]
    InvalidComponents { requested: usize, available: usize },
    #[error("need at least 2 rows, got {0}")]
    InsufficientRows(usize),

    // I/O.
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: String,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub(crate) fn for_class(self, class: &str) -> Error {
        Error::ClassFit {
            class: class.to_string(),
            source: Box::new(self),
        }
    }

    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Error {
        Error::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
