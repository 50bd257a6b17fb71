use thiserror::Error;

use crate::liouvillian::Diagnostics;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("degenerate geometry: sites {0} and {1} coincide")]
    DegenerateGeometry(usize, usize),
    #[error("Hilbert-space dimension {dim} exceeds cap {cap}")]
    DimensionCap { dim: usize, cap: usize },
    #[error("matrix is not Hermitian (deviation {0:e})")]
    NotHermitian(f64),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("no intra-manifold transitions to calibrate phonon coupling")]
    NoIntraManifold,
    #[error("rate requested at zero frequency")]
    ZeroFrequency,
    #[error("operator has no transition content")]
    ZeroTransition,
    #[error("configuration mismatch: {0}")]
    ModeMismatch(&'static str),
    #[error("model has no trap")]
    MissingTrap,
    #[error("voltage undefined: zero population")]
    VoltageUndefined,
    #[error("eigen-decomposition failed: {0}")]
    Eigen(String),
    #[error("steady-state solver failed: residual {residual:e} vs norm {norm:e}")]
    SolverFailure { residual: f64, norm: f64 },
    #[error("biorthogonalization of kernel bases failed (condition {0:e})")]
    Biorthogonalization(f64),
    #[error("steady state failed validation: {0:?}")]
    Validation(Diagnostics),
    #[error("disorder resampling exceeded {0} attempts")]
    DisorderResample(usize),
}

pub type Result<T> = std::result::Result<T, Error>;
