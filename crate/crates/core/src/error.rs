use thiserror::Error;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix is not Hermitian (max |h - h†| = {deviation:e})")]
    NotHermitian { deviation: f64 },

    #[error("matrix is not positive semidefinite (min eigenvalue {min_eigenvalue:e})")]
    NotPsd { min_eigenvalue: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix entries must be finite")]
    NonFinite,

    #[error("matrix data has {len} entries, expected {rows}x{cols}")]
    BadShape { rows: usize, cols: usize, len: usize },

    #[error("channel index {index} out of range for {count} jump operators")]
    BadChannelIndex { index: usize, count: usize },

    #[error("TLME is not Hermiticity-preserving (requires C = B† and E_j = D_j)")]
    NotHermiticityPreserving,

    #[error("weight operator is zero")]
    ZeroWeight,

    #[error("gauge root V does not satisfy V†V = 2 S_l (residual {residual:e})")]
    GaugeRootMismatch { residual: f64 },

    #[error("initial state norm {norm} is not 1")]
    NonUnitInitialState { norm: f64 },

    #[error("invalid time grid: {0}")]
    InvalidGrid(&'static str),

    #[error("growth rate not converged (last window slopes {previous:e}, {last:e})")]
    NotConverged { previous: f64, last: f64 },

    #[error("weighted coherence underflowed ({magnitude:e}) before the fit window")]
    SignalUnderflow { magnitude: f64 },

    #[error("Fock truncation {fock_dim} is too small (need at least 2)")]
    TruncationTooSmall { fock_dim: usize },

    #[error("counting field s = {s} must be non-negative for the unitary-coupled ancilla")]
    NegativeS { s: f64 },

    #[error("stability guard violated: dt·‖L‖² = {value} (must be < 0.1)")]
    StabilityGuard { value: f64 },

    #[error("signal has {found} increments, expected {expected}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("coupling does not satisfy L† = -L e^(2iφ) (residual {residual:e})")]
    ConditionNotSatisfied { residual: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(&'static str),
}
