use thiserror::Error;

pub type Result<T> = std::result::Result<T, GwbError>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GwbError {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    Dimension {
        context: String,
        expected: usize,
        found: usize,
    },

    #[error("invalid weights: {0}")]
    InvalidWeights(String),

    #[error("degenerate instance: {0}")]
    Degenerate(String),

    #[error("matrix is not symmetric (asymmetry {asymmetry:.3e})")]
    NotSymmetric { asymmetry: f64 },

    #[error("matrix has a negative eigenvalue {eigenvalue:.3e}")]
    NegativeEigenvalue { eigenvalue: f64 },

    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("A = sum_i w_i P_i^T P_i is singular; apply kernel_reduction first")]
    SingularA,

    #[error("cost tensor has {tuples} entries, above the cap of {cap}; use the entropic or free-support route")]
    TensorCap { tuples: usize, cap: usize },

    #[error("marginals mix measure kinds ({0}); no common W2 backend")]
    MixedMarginals(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("internal solver error: {0}")]
    Internal(String),
}

impl GwbError {
    pub(crate) fn dim(context: impl Into<String>, expected: usize, found: usize) -> Self {
        GwbError::Dimension {
            context: context.into(),
            expected,
            found,
        }
    }
}
