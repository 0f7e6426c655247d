//! Error types shared across the crate.

use thiserror::Error;

/// Errors produced by design, model construction, factorization, inference
/// and prediction.
#[derive(Error, Debug)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("coordinate {value} outside [{lo}, {hi}] in dimension {dim} (row {row})")]
    OutOfRange {
        value: f64,
        lo: f64,
        hi: f64,
        dim: usize,
        row: usize,
    },

    #[error("degenerate scaling in dimension {dim}: min {min} >= max {max}")]
    DegenerateScale { dim: usize, min: f64, max: f64 },

    #[error(
        "truncated power parameters alpha={alpha}, nu={nu} not admitted: \
         requires nu >= {required} (known sufficient bounds exist only for \
         alpha in {{1, 3/2, 5/3}}; pass an explicit nu with the validity \
         waiver to use other values)"
    )]
    InvalidTruncatedPower {
        alpha: f64,
        nu: f64,
        required: f64,
    },

    #[error("correlation range must be strictly positive, got {0}")]
    NonPositiveRange(f64),

    #[error("model is not compactly supported in every dimension; use the dense path")]
    NonCompactFamily,

    #[error("matrix not positive definite: pivot {pivot} (value {value:.3e})")]
    NotPositiveDefinite { pivot: usize, value: f64 },

    #[error("rank-deficient basis matrix for spec p={p}, m={m} (rank {rank} < {cols} columns)")]
    RankDeficientBasis {
        p: usize,
        m: usize,
        rank: usize,
        cols: usize,
    },

    #[error("generalized least squares system is rank deficient")]
    RankDeficientGls,

    #[error("need n > q + 2 observations: n={n}, q={q}")]
    TooFewObservations { n: usize, q: usize },

    #[error("initial point {0:?} lies outside the prior support")]
    InitialOutsideSupport(Vec<f64>),

    #[error("sampler aborted at iteration {iteration} with state {tau:?}: {source}")]
    SamplerAborted {
        iteration: usize,
        tau: Vec<f64>,
        #[source]
        source: Box<Error>,
    },

    #[error(
        "no positive cutoff attains sparsity target {target}: minimum achievable \
         proportion is {achieved} at C={c_min}"
    )]
    CutoffUnattainable {
        target: f64,
        achieved: f64,
        c_min: f64,
    },

    #[error("response is constant; efficiency denominator is zero")]
    ConstantResponse,

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("covariance matrix not positive definite (smallest eigenvalue ~ {min_eig:.3e})")]
    NonPositiveDefiniteCovariance { min_eig: f64 },

    #[error("sparse matrix pattern does not match the analyzed structure")]
    PatternMismatch,

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("{0}")]
    Schema(String),
}
