use thiserror::Error;

/// Errors produced by the estimation pipeline and its numerical kernels.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A triangular factor has a diagonal entry below the rank tolerance,
    /// so the factored matrix does not have full column rank.
    #[error("rank deficient at column {index}: |R[{index},{index}]| / |R[1,1]| = {ratio:.3e}")]
    RankDeficient { index: usize, ratio: f64 },

    /// Input matrix is not symmetric within tolerance.
    #[error("matrix is not symmetric: max asymmetry {asymmetry:.3e} exceeds tolerance")]
    NotSymmetric { asymmetry: f64 },

    /// A factorization pivot or eigenvalue that must be positive is not.
    #[error("matrix is not positive definite (pivot {pivot:.3e} at index {index})")]
    NotPositiveDefinite { index: usize, pivot: f64 },

    /// Operand shapes are incompatible.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// Operation requires densifying an operator whose dimension exceeds the guard.
    #[error("operator dimension {n} exceeds the dense-computation guard of {limit}")]
    TooLarge { n: usize, limit: usize },

    /// Requested matrix shape is invalid.
    #[error("bad shape: {0}")]
    BadShape(String),

    /// Basis columns are not orthonormal within tolerance.
    #[error("basis is not orthonormal: max deviation {deviation:.3e}")]
    NotOrthonormal { deviation: f64 },

    /// The dominant projection of the sketch lost rank.
    #[error("projected sketch is rank deficient: sigma_k / sigma_1 = {ratio:.3e}")]
    RankDeficientProjection { ratio: f64 },

    /// No eigenvalue gap at the requested split index.
    #[error("no eigenvalue gap at split index {k}: lambda_k = {lambda_k}, lambda_k1 = {lambda_k1}")]
    NoGap { k: usize, lambda_k: f64, lambda_k1: f64 },

    /// The eigenvalue at the split index is zero, so the gap ratio is undefined.
    #[error("eigenvalue at split index {k} is zero")]
    ZeroEigenvalue { k: usize },

    /// Sample-count formula needs the operator rank but none was supplied.
    #[error("sample-count formula for this distribution/variant requires the matrix rank")]
    MissingRank,

    /// Oversampling parameter below the minimum required by the bound.
    #[error("oversampling p = {p} is too small; this bound requires p >= {min}")]
    OversamplingTooSmall { p: usize, min: usize },

    /// A parameter is below the minimum required by the bound.
    #[error("parameter {name} = {value} is too small; minimum is {min}")]
    ParameterTooSmall {
        name: &'static str,
        value: usize,
        min: usize,
    },

    /// Generic invalid-parameter error with a diagnostic message.
    #[error("bad parameter: {0}")]
    BadParameter(String),

    /// The spectrum has zero total mass, so relative quantities are undefined.
    #[error("spectrum has zero trace")]
    ZeroTrace,

    /// Requested relative error cannot be reached for this spectrum.
    #[error("target relative error {eps} is not reachable: residual mass ratio is {delta}")]
    TargetUnreachable { eps: f64, delta: f64 },

    /// Malformed input file.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    /// I/O failure wrapped with the offending path.
    #[error("i/o error on {path}: {message}")]
    Io { path: String, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;
