use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// A quantity left its mathematical domain, e.g. a non-positive MSE.
    /// This always points at an upstream bug.
    #[error("numerical domain error: {0}")]
    NumericalDomain(String),

    #[error("eigendecomposition did not converge")]
    Eigensolver,

    #[error("bisection bracket violated: g(0) = {g_zero:e}, g(lambda_max) = {g_max:e}, p_max = {p_max:e}")]
    Bracketing { g_zero: f64, g_max: f64, p_max: f64 },

    #[error("retraction hit a zero entry at index {index}")]
    DegenerateRetraction { index: usize },

    #[error("config line {line}: {msg}")]
    Config { line: usize, msg: String },

    #[error("outer iteration {iteration}: {source}")]
    Iteration {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("usage: {0}")]
    Usage(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn at_iteration(self, iteration: usize) -> Self {
        Error::Iteration { iteration, source: Box::new(self) }
    }
}
