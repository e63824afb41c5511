use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not antisymmetric (max |A + A^T| = {0:.3e})")]
    NotAntisymmetric(f64),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix dimension {0} must be even")]
    OddDimension(usize),

    #[error("covariance matrix is not physical (largest singular value {0:.12})")]
    NotPhysical(f64),

    #[error("covariance matrix is not pure (|G^2 + 1|_F = {0:.3e})")]
    NotPure(f64),

    #[error("Majorana index {index} out of range for {modes} modes")]
    IndexOutOfRange { index: usize, modes: usize },

    #[error("Majorana indices must be strictly increasing")]
    IndicesNotIncreasing,

    #[error("lattice extents must be at least 2x2 (got {n_h}x{n_v})")]
    LatticeTooSmall { n_h: usize, n_v: usize },

    #[error("unknown boundary condition `{0}`")]
    UnknownBoundary(String),

    #[error("unknown interaction form `{0}`")]
    UnknownInteractionForm(String),

    #[error("non-hermitian operator term (imaginary residue {0:.3e})")]
    NonHermitian(f64),

    #[error("inverse temperature must be positive (got {0})")]
    InvalidBeta(f64),

    #[error("time step must be positive (got {0})")]
    InvalidTimeStep(f64),

    #[error("invalid option: {0}")]
    InvalidOption(String),

    #[error("observable requires a periodic lattice")]
    RequiresPeriodic,

    #[error("displacement ({dh}, {dv}) lies outside the lattice")]
    DisplacementOutOfRange { dh: isize, dv: isize },

    #[error("{modes} modes exceed the Fock-space oracle limit of {limit}")]
    TooManyModes { modes: usize, limit: usize },

    #[error("no transition detected in the supplied series")]
    NoTransition,

    #[error("not enough points for the fit: need {needed}, have {found}")]
    InsufficientData { needed: usize, found: usize },

    #[error("imaginary-time flow stopped after {} steps with residual {:.3e}", .0.steps, .0.residual)]
    GroundUnconverged(Box<crate::ground::GroundResult>),

    #[error("linear algebra failure: {0}")]
    Linalg(String),
}

pub type Result<T> = std::result::Result<T, Error>;
