use thiserror::Error;

use crate::attack::Constraint;

/// Errors raised by the Gaussian calculus, rate formulas and landscape analysis.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("covariance matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("covariance matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("numerical degeneracy in symplectic spectrum (pairing residual {0:e})")]
    NumericalDegeneracy(f64),

    #[error("unphysical symplectic eigenvalue {0}")]
    UnphysicalEigenvalue(f64),

    #[error("invalid mode index {index} for a {n_modes}-mode state")]
    InvalidMode { index: usize, n_modes: usize },

    #[error("mode indices must be distinct (got {0} twice)")]
    IdenticalModes(usize),

    #[error("singular measurement update: {0}")]
    SingularMeasurement(String),

    #[error("degenerate homodyne measurement: quadrature variance {0:e}")]
    DegenerateMeasurement(f64),

    #[error("unphysical attack: {0}")]
    Unphysical(Constraint),

    #[error("transmissivity {0} is outside the open interval (0, 1)")]
    BoundaryTransmissivity(f64),

    #[error("physical region is empty or degenerate at omega = {0}")]
    EmptyRegion(f64),

    #[error("no sign change on bracket [{lo}, {hi}]")]
    NoSignChange { lo: f64, hi: f64 },

    #[error("finite-difference stencil at ({g}, {g_prime}) leaves the physical region")]
    StencilOutsideRegion { g: f64, g_prime: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
