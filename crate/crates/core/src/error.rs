use thiserror::Error;

#[derive(Debug, Error)]
pub enum LatticeError {
    #[error("grid dimension must be 2 or 3, got {0}")]
    Dimension(usize),
    #[error("points per axis must be even and at least 8, got {0}")]
    Points(usize),
    #[error("half width must be positive and finite, got {0}")]
    HalfWidth(f64),
    #[error("field has {found} values, grid has {expected} points")]
    Length { expected: usize, found: usize },
    #[error("field contains non-finite values")]
    NonFinite,
    #[error("quarter turn needs equal points and half widths on the first two axes")]
    NotSquare,
    #[error("malformed field dump: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error("trap is unstable under rotation; confinement fails near {witness:?}")]
    Unstable { witness: Vec<f64> },
    #[error("field is not normalized (norm² = {0})")]
    NotNormalized(f64),
    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("invalid density-matrix state: {0}")]
    InvalidState(String),
    #[error("trap is not axisymmetric about the rotation axis")]
    NotAxisymmetricTrap,
    #[error("Hilbert space dimension {dim} exceeds the limit {limit}")]
    DimensionTooLarge { dim: usize, limit: usize },
    #[error("scattering length is not finite for this potential")]
    NonFiniteScatteringLength,
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
