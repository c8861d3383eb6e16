use std::fmt;

/// Everything that can go wrong inside the library.
///
/// Variants carry enough context to print a useful diagnostic; none of them
/// wrap foreign error types, so the enum is `Clone` and cheap to pass around.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("root is not bracketed: f({lo}) = {f_lo}, f({hi}) = {f_hi}")]
    NoBracket {
        lo: f64,
        hi: f64,
        f_lo: f64,
        f_hi: f64,
    },
    #[error("{what} did not converge after {iterations} iterations (best residual {residual:e})")]
    NoConvergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },
    #[error("matrix is singular to working precision (pivot {pivot:e} at column {column})")]
    Singular { column: usize, pivot: f64 },
    #[error("matrix is not symmetric (defect {defect:e})")]
    NotSymmetric { defect: f64 },
    #[error("total density is zero")]
    ZeroTotalDensity,
    #[error("state is not in the open positive cone: {0}")]
    NotInterior(StateProblem),
    #[error("total density must be positive, got {0}")]
    NonpositiveDensity(f64),
    #[error("invalid species description: {0}")]
    InvalidSpecies(String),
    #[error("invalid friction model: {0}")]
    InvalidFriction(String),
    #[error("driving forces do not sum to zero (column {column}, sum {sum:e})")]
    UnbalancedForces { column: usize, sum: f64 },
    #[error("bordered Maxwell-Stefan matrix is singular beyond its kernel")]
    SingularBeyondKernel,
    #[error("invalid initial profile: {0}")]
    InvalidProfile(String),
    #[error("invalid simulation setup: {0}")]
    InvalidSimulation(String),
    #[error("time step underflow (dt = {dt:e} at t = {t})")]
    CflViolation { dt: f64, t: f64 },
    #[error("non-finite value in cell {cell} at t = {t}")]
    StateCorrupted { cell: usize, t: f64 },
    #[error(
        "energy audit failed at t = {t}: increase {increase:e} exceeds tolerance {tolerance:e}"
    )]
    AuditFailure {
        t: f64,
        increase: f64,
        tolerance: f64,
    },
    #[error("config error: {0}")]
    Config(String),
}

/// Why a density vector was rejected.
#[derive(Debug, Clone, PartialEq)]
pub struct StateProblem {
    pub index: usize,
    pub value: f64,
}

impl fmt::Display for StateProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "rho[{}] = {}", self.index, self.value)
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
