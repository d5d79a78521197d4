use std::fmt;

/// Which side of the constraint list an index refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstraintKind {
    Inequality,
    Equality,
}

impl fmt::Display for ConstraintKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConstraintKind::Inequality => f.write_str("inequality"),
            ConstraintKind::Equality => f.write_str("equality"),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("basis over {n} letters up to degree {d} exceeds the index limit {limit}")]
    Capacity { n: usize, d: usize, limit: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("order below k_min = {min} (requested {order})")]
    OrderTooSmall { order: usize, min: usize },

    #[error("word {word} has degree {degree}, above the bound {bound}")]
    DegreeTooHigh {
        word: String,
        degree: usize,
        bound: usize,
    },

    #[error("{kind} constraint {index} fits no clique")]
    ConstraintOutsideCliques { kind: ConstraintKind, index: usize },

    #[error("no closed-form certificate pattern matches this problem")]
    PatternNotRecognized,

    #[error("CTP not certified: {0}")]
    NotCertified(String),

    #[error("certificate does not match relaxation: {0}")]
    CertificateMismatch(String),

    #[error("eigensolver did not converge: {0}")]
    EigenNonConvergence(String),

    #[error("non-finite gradient at iteration {0}")]
    NonFiniteGradient(usize),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
