//! Error type shared by all modules.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum RdeError {
    /// Argument outside its mathematical domain (e.g. a point outside `[0,1]`).
    #[error("domain error: {0}")]
    Domain(String),

    /// Out-of-range index into a finite family.
    #[error("index error: {0}")]
    Index(String),

    /// A map or random system failed its construction invariants.
    #[error("invalid system: {0}")]
    InvalidSystem(String),

    /// An iterative solver ran out of iterations. For eigenvalue problems
    /// this signals loss of spectral dominance or a missing gap.
    #[error("no convergence: {0}")]
    NonConvergence(String),

    /// A documented precondition of an operation does not hold.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// Asymptotic variance is (numerically) zero where a theorem needs it
    /// positive.
    #[error("degenerate variance: {0}")]
    DegenerateVariance(String),

    /// A resource guard tripped (e.g. doubled grids beyond the size cap).
    #[error("resource guard: {0}")]
    Resource(String),

    /// Configuration file problems, reported with field context.
    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, RdeError>;
