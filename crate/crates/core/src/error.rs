use thiserror::Error;

/// Errors produced by the simulation, projection and spectral layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("retraction diverged: unitarity defect {defect:.3e}")]
    Divergence { defect: f64 },

    #[error("column {column} left the affine chart: |q_nj| = {modulus:.3e}")]
    DomainExit { column: usize, modulus: f64 },

    #[error("logarithm undefined at the antipode of the identity")]
    Antipodal,

    #[error("assembled matrix failed the invariant check: {0}")]
    AssemblyInvariant(String),

    #[error("orthogonalisation lost positivity at degree {degree}; largest safe degree is {max_safe_degree}")]
    Conditioning { degree: usize, max_safe_degree: usize },

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    #[error("too few samples: need at least {needed}, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("path {index}: {source}")]
    Path { index: u64, source: Box<Error> },
}

impl Error {
    /// Attach the index of the path on which the error occurred, unless one is already attached.
    pub fn at_path(self, index: u64) -> Self {
        match self {
            Error::Path { .. } => self,
            other => Error::Path { index, source: Box::new(other) },
        }
    }

    /// Whether the error is a chart exit, possibly wrapped with a path index.
    pub fn is_domain_exit(&self) -> bool {
        match self {
            Error::DomainExit { .. } => true,
            Error::Path { source, .. } => source.is_domain_exit(),
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
