use thiserror::Error;

/// Errors produced by the numerical layers of the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// A constructor invariant was violated (interval ordering, weight
    /// positivity, overlapping supports, ...).
    #[error("invalid input: {0}")]
    Invalid(String),

    /// Evaluation requested at a point inside (or too close to) the
    /// support of a measure or at a pole of a denominator.
    #[error("domain error: {0}")]
    Domain(String),

    /// A denominator was evaluated at (or too close to) one of its zeros.
    #[error("pole encountered: {0}")]
    Pole(String),

    /// Three-term recurrence coefficients lost positivity.
    #[error("recurrence breakdown at degree {degree}: {detail}")]
    Recurrence { degree: usize, detail: String },

    /// A linear system that should be solvable turned out numerically
    /// singular.
    #[error("singular system: {0}")]
    Singular(String),

    /// The homogeneous moment system has numerical null space of
    /// dimension two or more; signals broken quadrature.
    #[error("degenerate moment system: {0}")]
    Degenerate(String),

    /// A structural count or sign pattern guaranteed by the theory was
    /// not observed numerically.
    #[error("structural check failed: {0}")]
    Structural(String),

    /// An iteration failed to reach its tolerance within its budget.
    #[error("failed to converge: {detail}")]
    NonConvergence { detail: String, trace: Vec<f64> },

    /// A polynomial expected to have all-real zeros produced an
    /// eigenvalue with a non-negligible imaginary part.
    #[error("nonreal zero: {0}")]
    NonrealZero(String),

    /// A zero could not be classified as interior to an interval.
    #[error("boundary ambiguity: {0}")]
    Boundary(String),

    /// The requested degree exceeds the documented double-precision
    /// ceiling.
    #[error("degree ceiling exceeded: {0}")]
    Ceiling(String),
}

pub type Result<T> = std::result::Result<T, Error>;
