use thiserror::Error;

/// Errors surfaced by state validation, measurements, and solvers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("{name} = {value} outside [{lo}, {hi}]")]
    OutOfRange {
        name: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },
    #[error("2x2 density matrix not positive: |Q|^2 = {qsq} > P(1-P) = {bound}")]
    NonPositive { qsq: f64, bound: f64 },
    #[error("invalid inverse temperature beta = {0}; must be > 0 (or +inf for T = 0)")]
    InvalidTemperature(f64),
    #[error("negative evolution time t = {0}")]
    NegativeTime(f64),
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("post-selection probability {0:e} below threshold; outcome branch is empty")]
    ZeroProbability(f64),
    #[error("matrix is not a valid density matrix: {0}")]
    NotDensity(&'static str),
    #[error("invalid coupling matrix: {0}")]
    InvalidCoupling(&'static str),
    #[error("long-time w-tilde limit is degenerate at f = 0")]
    ZeroTemperature,
    #[error("{n} cells exceed the dense-operator cap of {cap}")]
    TooLarge { n: usize, cap: usize },
    #[error("integrator step size underflow near t = {0}")]
    StepFailure(f64),
    #[error("no operational points in the searched grid")]
    NoRoot,
}

pub type Result<T> = std::result::Result<T, Error>;
