use thiserror::Error;

/// Errors raised by the library.
///
/// Variants fall in three families that the command-line front end maps to
/// distinct exit codes: invalid input ([`Error::InvalidInput`],
/// [`Error::DegenerateData`], model validation), mathematical domain
/// problems (poles, non-positive measures, singular coefficients) and
/// non-convergence of an iterative procedure.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("degenerate data: A and B are both the zero polynomial")]
    DegenerateData,
    #[error("data does not fall in any weight case: {0}")]
    Unclassified(String),
    #[error("no positive measure: {0}")]
    NoPositiveMeasure(String),
    #[error("pole at {at}: {what}")]
    Pole { at: f64, what: String },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("singular coefficient: {0}")]
    Singular(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("{what} did not converge within {iterations} iterations")]
    NonConvergence { what: String, iterations: usize },
    #[error("series diverges: {0}")]
    Divergence(String),
    #[error("fixed point x = {0} of the affine map; the difference quotient is undefined")]
    FixedPoint(f64),
    #[error("alpha matrix is singular")]
    SingularAlpha,
    #[error("row {row} of alpha*k is {value}, expected {expected}")]
    ConstraintViolation { row: usize, value: f64, expected: f64 },
    #[error("occupations {0:?} are not a nonnegative integer lattice point")]
    NonLattice(Vec<f64>),
    #[error("R(q^{n}) = {value} is not positive")]
    NegativeR { n: usize, value: f64 },
    #[error("{0} exceeds the memory budget")]
    MemoryBudget(String),
}

impl Error {
    /// True for errors caused by iteration limits or divergent series.
    pub fn is_non_convergence(&self) -> bool {
        matches!(self, Error::NonConvergence { .. } | Error::Divergence(_))
    }

    /// True for errors caused by malformed or inconsistent input.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::InvalidInput(_)
                | Error::DegenerateData
                | Error::SingularAlpha
                | Error::ConstraintViolation { .. }
                | Error::MemoryBudget(_)
        )
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
