use thiserror::Error;

/// Coarse classification used by callers that map errors to exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// The inputs violate a documented precondition or invariant.
    Validation,
    /// The computation itself failed (pole, divergence, instability, ...).
    Numerical,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("gamma pole: argument {arg} hits a pole of Gamma at factor index {index} (of {m})")]
    GammaPole { arg: f64, index: usize, m: usize },

    #[error("zonal table degree {requested} exceeds the configured cap {cap}")]
    ZonalDegreeCap { requested: usize, cap: usize },

    #[error("no zonal table for degree {degree} (built up to {built}) or too many parts for max_parts {max_parts}")]
    MissingZonalTable {
        degree: usize,
        built: usize,
        max_parts: usize,
    },

    #[error("invariant tables do not cover bidegree ({k},{l}); cap is total degree {cap}")]
    UnsupportedBidegree { k: usize, l: usize, cap: usize },

    #[error("matrix dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("Pochhammer pole: ({a})_kappa vanishes for kappa={kappa:?}, series coefficient undefined")]
    PochhammerPole { a: f64, kappa: Vec<usize> },

    #[error("bootstrap kernel rank unstable across seeds: {0} vs {1}")]
    RankInstability(usize, usize),

    #[error("bootstrap fit residual {residual:.3e} exceeds tolerance {tol:.3e}")]
    ResidualTooLarge { residual: f64, tol: f64 },

    #[error("matrix numerically rank deficient: needed rank {needed}, numerical rank {found}")]
    RankDeficient { needed: usize, found: usize },

    #[error("near-singular matrix: condition estimate {cond:.3e} exceeds cap {cap:.3e}")]
    NearSingular { cond: f64, cap: f64 },

    #[error("degenerate spectrum: eigenvalues {i} and {j} within {gap:.3e}")]
    DegenerateSpectrum { i: usize, j: usize, gap: f64 },

    #[error("invalid degrees of freedom: {0}")]
    InvalidDof(String),

    #[error("invalid fixture data: {0}")]
    Fixture(String),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        use Error::*;
        match self {
            DimensionMismatch(_) | Domain(_) | InvalidParams(_) | InvalidDof(_)
            | ZonalDegreeCap { .. } | UnsupportedBidegree { .. } => ErrorKind::Validation,
            _ => ErrorKind::Numerical,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
