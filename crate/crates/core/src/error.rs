use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The jitter ladder was exhausted without a successful factorization.
    #[error("cholesky factorization failed up to jitter {max_jitter:e} (n = {size}, diag range [{min_diag:e}, {max_diag:e}])")]
    Factorization {
        size: usize,
        max_jitter: f64,
        min_diag: f64,
        max_diag: f64,
    },

    #[error("no interior dimensions at the query point")]
    NoInteriorDimensions,

    #[error("undefined inner minimum: no support points inside the convex region")]
    UndefinedInnerMinimum,

    #[error("global regret reduction requires an expected inner minimum")]
    MissingInnerMinimum,

    #[error("no feasible proposal: every candidate lies inside the excluded region")]
    NoFeasibleProposal,

    #[error("unknown objective `{name}` (supported: {supported})")]
    UnknownObjective { name: String, supported: String },

    #[error("benchmark `{0}` has no known minimum")]
    MissingKnownMinimum(String),

    #[error("objective returned a non-finite value at {0:?}")]
    NonFiniteObjective(Vec<f64>),

    #[error("i/o error: {0}")]
    Io(String),

    #[error("parse error: {0}")]
    Parse(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}
