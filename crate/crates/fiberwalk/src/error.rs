use thiserror::Error;

/// Errors produced by model construction, operator assembly, and the
/// numerical routines built on top of them.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid lattice: {0}")]
    InvalidLattice(String),

    #[error("invalid physical constants: {0}")]
    InvalidConstants(String),

    #[error("invalid field configuration: {0}")]
    InvalidField(String),

    #[error(
        "no admissible energy cutoff: sup|V| = {sup_v} exceeds 2*hbar^2/(a^2 m) = {limit}; \
         the lattice is too coarse for this potential"
    )]
    InfeasibleCutoff { sup_v: f64, limit: f64 },

    #[error("energy cutoff {k0} outside admissible interval [{lo}, {hi}]")]
    CutoffOutOfRange { k0: f64, lo: f64, hi: f64 },

    #[error("site index {index} out of range (lattice has {count} sites)")]
    SiteOutOfRange { index: usize, count: usize },

    #[error("coordinate {coord} out of range on axis {axis} (sites per axis {len})")]
    CoordinateOutOfRange { coord: usize, axis: usize, len: usize },

    #[error("negative jump rate {rate} at state {state}")]
    NegativeRate { state: usize, rate: f64 },

    #[error("not a Markov generator: {0}")]
    NotMarkov(String),

    #[error("matrix dimension {dim} exceeds dense cap {cap}")]
    DenseCapExceeded { dim: usize, cap: usize },

    #[error("iteration did not converge: achieved {achieved:e}, requested {requested:e}")]
    NoConvergence { achieved: f64, requested: f64 },

    #[error(
        "sector difference is not a constant multiple of the identity \
         (off-diagonal {off_diagonal:e}, diagonal spread {diagonal_spread:e}); \
         operator builders disagree on the winding convention"
    )]
    NonConstantDiagonal {
        off_diagonal: f64,
        diagonal_spread: f64,
    },

    #[error(
        "amplification exponent {exponent:.3} exceeds cap {cap}: \
         the e^(2 K0 t) growth cannot be represented honestly in double precision"
    )]
    ExponentCap { exponent: f64, cap: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("conditioning on a zero-probability event (trace {trace:e} below tolerance)")]
    ZeroProbabilityEvent { trace: f64 },

    #[error("value {value} is not an eigenvalue of the observable (closest gap {gap:e})")]
    EigenvalueNotFound { value: f64, gap: f64 },

    #[error("matrix is not Hermitian (defect {defect:e})")]
    NotHermitian { defect: f64 },

    #[error("fiber transform angle {p} is not a multiple of pi/2")]
    InvalidFiberAngle { p: f64 },

    #[error("time {t} is not an integer multiple of the grid step {dt}")]
    TimeGrid { t: f64, dt: f64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
