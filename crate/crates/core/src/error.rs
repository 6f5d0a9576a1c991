use core::fmt;

pub type Result<T, E = Error> = core::result::Result<T, E>;

/// State-validity invariant checked during integration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Invariant {
    Trace,
    Hermiticity,
    Positivity,
}

impl fmt::Display for Invariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Invariant::Trace => "trace error",
            Invariant::Hermiticity => "hermiticity error",
            Invariant::Positivity => "negative eigenvalue",
        })
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid Fock cutoff: n_max must be at least 1")]
    InvalidCutoff,
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix has non-finite entries")]
    NonFinite,
    #[error("occupation ({m}, {n}) outside 0..={n_max}")]
    OccupationOutOfRange { m: usize, n: usize, n_max: usize },
    #[error("invalid atom preparation: {0}")]
    InvalidAtom(&'static str),
    #[error("invalid interaction parameters: {0}")]
    InvalidParams(&'static str),
    #[error("invalid solver configuration: {0}")]
    InvalidSolver(&'static str),
    #[error("invalid time grid: {0}")]
    InvalidGrid(&'static str),
    #[error("input is not Hermitian (error {0:e})")]
    NotHermitian(f64),
    #[error("state validation failed at t = {t}: {invariant} {value:e} beyond tolerance {tolerance:e}")]
    Validation {
        t: f64,
        invariant: Invariant,
        value: f64,
        tolerance: f64,
    },
    #[error("step size underflow at t = {t} (h = {h:e})")]
    StepUnderflow { t: f64, h: f64 },
    #[error("step budget of {limit} exhausted at t = {t}")]
    StepBudget { t: f64, limit: usize },
    #[error("collision probability r*dt = {0} exceeds 1")]
    ProbabilityOverflow(f64),
    #[error("ensemble needs at least two trajectories, got {0}")]
    TooFewTrajectories(usize),
    #[error("trajectory seed {0} is used more than once")]
    DuplicateSeed(u64),
}
