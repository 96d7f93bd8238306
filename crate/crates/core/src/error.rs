use thiserror::Error;

/// Errors raised by the library.
///
/// Variants split into two broad classes: malformed input (bad parameters,
/// unparsable expressions) and configurations that are well-formed but
/// infeasible (zero asymptotic variance, enumeration guard exceeded, a `K(n)`
/// that breaks its growth constraint). See [`Error::is_infeasible`].
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("sample size must be at least {min}, got {got}")]
    SampleTooSmall { min: u64, got: u64 },

    #[error("series diverges: {0}")]
    Divergent(String),

    #[error("could not certify truncated series to relative tolerance {tolerance:e}")]
    Uncertified { tolerance: f64 },

    #[error("asymptotic variance is zero: {0}")]
    DegenerateVariance(String),

    #[error("enumeration too large: k = {k}, n = {n} (limits k <= {max_k}, n <= {max_n})")]
    EnumerationGuard {
        k: usize,
        n: u64,
        max_k: usize,
        max_n: u64,
    },

    #[error("K(n) = {k} exceeds n^(1/2 - delta) = {bound} at n = {n}")]
    CutoffTooLarge { n: u64, k: u64, bound: f64 },

    #[error("cannot parse expression `{expr}`: {reason}")]
    Expression { expr: String, reason: String },

    #[error("index does not support this operation: {0}")]
    Unsupported(String),

    #[error("worker pool: {0}")]
    Pool(String),
}

impl Error {
    /// True for errors describing a well-formed but infeasible request.
    pub fn is_infeasible(&self) -> bool {
        matches!(
            self,
            Error::DegenerateVariance(_)
                | Error::EnumerationGuard { .. }
                | Error::CutoffTooLarge { .. }
                | Error::Divergent(_)
                | Error::Uncertified { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
