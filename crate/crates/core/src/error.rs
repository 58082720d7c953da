use thiserror::Error;

use crate::criteria::Criterion;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("input contains non-finite values")]
    NonFiniteInput,

    #[error("column {0} has zero sample variance")]
    ConstantColumn(usize),

    #[error("subset is empty")]
    EmptySubset,

    #[error("design submatrix for subset {0:?} is numerically rank-deficient")]
    RankDeficient(Vec<usize>),

    #[error("degenerate design: column {0} is collinear with the active set")]
    DegenerateDesign(usize),

    #[error("path step is not positive (gamma = {0:e})")]
    NoProgress(f64),

    #[error("every candidate subset was excluded")]
    NoCandidates,

    #[error("every candidate is infeasible under {0}")]
    AllInfeasible(Criterion),

    #[error("argument outside the domain: {0}")]
    DomainError(String),

    #[error("loss rank is infeasible: n(1 - rho) <= df")]
    Infeasible,

    #[error("all lasso coefficients are zero")]
    AllZeroCoefficients,

    #[error("effective degrees of freedom {df:.4} >= n = {n}")]
    DegreesOfFreedomOverflow { df: f64, n: usize },

    #[error("residual sum of squares is zero")]
    PerfectFit,

    #[error("dimension {d} exceeds the exhaustive-search limit {limit}")]
    DimensionTooLarge { d: usize, limit: usize },

    #[error("coordinate descent did not converge after {0} sweeps")]
    NoConvergence(usize),

    #[error("parse error at row {row}, column {column}: {message}")]
    Parse { row: usize, column: String, message: String },

    #[error("data file not found: {0}")]
    MissingDataFile(String),
}
