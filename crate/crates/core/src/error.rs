use thiserror::Error;

/// Errors produced anywhere in the certification and optimization pipeline.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix is not symmetric (max asymmetry {asymmetry:e})")]
    NotSymmetric { asymmetry: f64 },

    #[error("matrix is not positive definite (min eigenvalue {min_eigenvalue:e})")]
    NotPositiveDefinite { min_eigenvalue: f64 },

    #[error("matrix is singular")]
    Singular,

    #[error("matrix is not Hurwitz (max real eigenvalue part {max_real:e})")]
    NotHurwitz { max_real: f64 },

    #[error("invalid polytope: {0}")]
    InvalidPolytope(String),

    #[error("facet {facet} is empty")]
    EmptyFacet { facet: usize },

    #[error("all facets of the polytope are empty")]
    DegeneratePolytope,

    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("quadratic program is infeasible")]
    InfeasibleQp,

    #[error("sector estimation failed: {0}")]
    SectorFailure(String),

    #[error("semidefinite program infeasible (best margin {margin:e})")]
    SdpInfeasible { margin: f64 },

    #[error("hypothesis violated: {0}")]
    HypothesisViolation(String),

    #[error("no verified convex inner approximation")]
    InnerApproxFailure,

    #[error("unregistered elementary function `{0}`")]
    UnregisteredFunction(String),

    #[error("recasting exceeded nesting depth {0}")]
    DepthExceeded(usize),

    #[error("polytope error: {0}")]
    PolytopeError(String),

    #[error("certificate rejected: {0}")]
    CertificateRejected(String),

    #[error("not a sum of squares (best margin {margin:e})")]
    NotSos { margin: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("nonlinear program {0}")]
    Nlp(String),

    #[error("dimension too large for brute force ({0})")]
    DimensionTooLarge(usize),
}

impl Error {
    /// Whether the error reports an infeasible or unsolved problem rather
    /// than malformed input.
    pub fn is_infeasibility(&self) -> bool {
        matches!(
            self,
            Error::NotPositiveDefinite { .. }
                | Error::NotHurwitz { .. }
                | Error::EmptyFacet { .. }
                | Error::DegeneratePolytope
                | Error::NoConvergence { .. }
                | Error::InfeasibleQp
                | Error::SectorFailure(_)
                | Error::SdpInfeasible { .. }
                | Error::InnerApproxFailure
                | Error::CertificateRejected(_)
                | Error::NotSos { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}
