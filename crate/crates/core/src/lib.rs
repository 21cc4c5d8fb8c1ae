//! Generalized Wasserstein barycenters: measures on `R^d` whose images under
//! linear maps `Pᵢ` best match given marginals `νᵢ` on `R^{dᵢ}`.

pub mod error;
pub mod gaussian_solver;
pub mod gmm;
pub mod linalg;
pub mod lp;
pub mod measures;
pub mod multimarginal;
pub mod ot;
pub mod sinkhorn;

pub use error::{GwbError, Result};
