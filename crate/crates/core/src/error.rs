use alloc::string::String;

/// Failures raised anywhere in the identification pipeline.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("length mismatch: {what} ({left} vs {right})")]
    LengthMismatch {
        what: &'static str,
        left: usize,
        right: usize,
    },
    #[error("simulation diverged at sample {index} (|value| = {value:e} exceeds bound)")]
    Divergence { index: usize, value: f64 },
    #[error("domain error at sample {index}: {reason}")]
    Domain { index: usize, reason: &'static str },
    #[error("series too short: need more than {needed} samples, got {got}")]
    TooShort { needed: usize, got: usize },
    #[error("no sign change of the steady-state residual in [{lo}, {hi}]")]
    NoSignChange { lo: f64, hi: f64 },
    #[error("root finding did not converge after {iterations} iterations")]
    NotConverged { iterations: usize },
    #[error("rank-deficient regressor: rank {rank} < {columns} columns")]
    RankDeficient { rank: usize, columns: usize },
    #[error("descriptor mismatch between block 0 and block {block}")]
    DescriptorMismatch { block: usize },
    #[error("non-finite coordinate update in column {column}")]
    NonFiniteCoordinate { column: usize },
    #[error("cross-validation fold {fold} has no rows for operating point {op}")]
    EmptyFold { fold: usize, op: usize },
    #[error("feature selection is empty (lambda too large)")]
    EmptySelection,
    #[error("operating points must be distinct and at least two: {0}")]
    DegenerateOperatingPoints(String),
}

pub type Result<T> = core::result::Result<T, Error>;
