use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("gram matrix is not positive definite")]
    NotPositiveDefinite,
    #[error("gram matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),
    #[error("certified tail radius needs more than {budget} lattice vectors")]
    TailBoundFailure { budget: usize },
    #[error("enumeration exceeded the budget of {budget} vectors")]
    EnumerationBudget { budget: usize },
    #[error("polytopes of dimension {0} are not supported")]
    DimensionUnsupported(usize),
    #[error("invalid polytope: {0}")]
    InvalidPolytope(String),
    #[error("invalid weight: {0}")]
    InvalidWeight(String),
    #[error("invalid measure: {0}")]
    InvalidMeasure(String),
    #[error("weight is not smooth enough for this operation")]
    WeightNotSmooth,
    #[error("integrand tail is not dominated by the measure's decay envelope: {0}")]
    TailNotDominated(String),
    #[error("sample box slopes [{lo}, {hi}] do not bracket the polytope")]
    SlopeRangeTooNarrow { lo: f64, hi: f64 },
    #[error("sup-norm refinement did not converge after {0} cells")]
    GridNotConverged(usize),
    #[error("quadrature did not reach tolerance: {0}")]
    QuadratureFailed(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;
