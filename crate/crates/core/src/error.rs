use thiserror::Error;

/// Errors raised by the numerical pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("section index {j} out of range for level k = {k}")]
    Index { k: u32, j: u32 },

    #[error("derivative order {0} is not supported (maximum is 4)")]
    UnsupportedOrder(u8),

    #[error("observable class `{0}` has no closed-form Toeplitz matrix")]
    UnsupportedClass(String),

    #[error("test function has no exact Fourier transform")]
    NoFourierTransform,

    #[error("assembly failed at level k = {k}: {reason}")]
    Assembly { k: u32, reason: String },

    #[error("eigensolver did not converge for n = {n}: off-diagonal norm {off_diagonal:e} after {iterations} iterations")]
    NoConvergence {
        n: usize,
        off_diagonal: f64,
        iterations: usize,
    },

    #[error("fit system is ill-conditioned (condition {condition:e})")]
    IllConditioned { condition: f64 },

    #[error("invalid k-grid: {0}")]
    Grid(String),

    #[error("at level k = {k}: {source}")]
    AtLevel {
        k: u32,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn at_level(self, k: u32) -> Self {
        Error::AtLevel {
            k,
            source: Box::new(self),
        }
    }
}
