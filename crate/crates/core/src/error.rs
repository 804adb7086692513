use num_complex::Complex64;
use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("λ = {lambda} coincides with the atom at t = {position}")]
    PoleAtAtom { lambda: Complex64, position: f64 },

    #[error("value f = -i has no Cayley image")]
    DegenerateValue,

    #[error("no convergence: {0}")]
    NonConvergent(String),

    #[error("invalid Herglotz data: {0}")]
    InvalidData(String),

    #[error("matrix is not Hermitian (defect {defect:e})")]
    NotHermitian { defect: f64 },

    #[error("boundary functionals are linearly dependent")]
    DependentFunctionals,

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("dimension {0} is too small (need at least 3)")]
    DimensionTooSmall(usize),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("shooting solution exceeded 1e12 at x = {x}")]
    ShootingBlowup { x: f64 },

    #[error("characteristic function vanishes at λ = {lambda} (eigenvalue of the extension)")]
    CharacteristicZero { lambda: Complex64 },

    #[error("atom at t = {position} lies in the scan window")]
    AtomInWindow { position: f64 },

    #[error("λ = {lambda} is within {distance:e} of a pencil eigenvalue")]
    NearEigenvalue { lambda: Complex64, distance: f64 },

    #[error("eigenvalue {lambda} collides with the atom at t = {position}")]
    AtomCollision { lambda: f64, position: f64 },

    #[error("functions live on different meshes")]
    MeshMismatch,

    #[error("config error in `{field}`: {message}")]
    Config { field: String, message: String },
}
