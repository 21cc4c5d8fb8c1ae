//! Pairwise optimal transport for the squared Euclidean cost.

use nalgebra::{DMatrix, DVector};

use crate::error::{GwbError, Result};
use crate::linalg;
use crate::lp::solve_transport;
use crate::measures::{DiscreteMeasure, GaussianMeasure};
use crate::sinkhorn::{sinkhorn_tensor, SinkhornOptions};

/// Sparse coupling between two discrete measures.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportPlan {
    pub rows: usize,
    pub cols: usize,
    /// `(source atom, target atom, mass)` with positive mass.
    pub entries: Vec<(usize, usize, f64)>,
    /// `Σ mass · |xᵢ − yⱼ|²`.
    pub cost: f64,
}

impl TransportPlan {
    pub fn row_sums(&self) -> Vec<f64> {
        let mut s = vec![0.0; self.rows];
        for &(i, _, m) in &self.entries {
            s[i] += m;
        }
        s
    }

    pub fn col_sums(&self) -> Vec<f64> {
        let mut s = vec![0.0; self.cols];
        for &(_, j, m) in &self.entries {
            s[j] += m;
        }
        s
    }
}

/// Kantorovich potentials returned by the exact solver.
#[derive(Debug, Clone, PartialEq)]
pub struct DualCertificate {
    pub source_potential: Vec<f64>,
    pub target_potential: Vec<f64>,
    /// `max |c_ij − u_i − v_j|` over the support of the plan.
    pub slackness_residual: f64,
    /// `min_ij (c_ij − u_i − v_j)`, non-negative up to round-off.
    pub min_reduced_cost: f64,
}

impl DualCertificate {
    pub fn dual_objective(&self, mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> f64 {
        mu.weights().dot(&DVector::from_column_slice(&self.source_potential))
            + nu.weights().dot(&DVector::from_column_slice(&self.target_potential))
    }
}

#[derive(Debug, Clone)]
pub struct ExactTransport {
    pub plan: TransportPlan,
    pub certificate: DualCertificate,
}

/// Row-major `|xᵢ − yⱼ|²` over the atoms of both measures.
pub fn squared_distances(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<Vec<f64>> {
    if mu.dim() != nu.dim() {
        return Err(GwbError::dim("ambient dimension", mu.dim(), nu.dim()));
    }
    let (x, y) = (mu.points(), nu.points());
    let mut cost = Vec::with_capacity(x.nrows() * y.nrows());
    for i in 0..x.nrows() {
        for j in 0..y.nrows() {
            let d: f64 = (0..x.ncols()).map(|k| (x[(i, k)] - y[(j, k)]).powi(2)).sum();
            cost.push(d);
        }
    }
    Ok(cost)
}

/// Optimal plan for the squared Euclidean cost, solved exactly as a
/// transportation LP.
pub fn w2_discrete_exact(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<ExactTransport> {
    let cost = squared_distances(mu, nu)?;
    let (m, n) = (mu.len(), nu.len());
    let sol = solve_transport(
        &[m, n],
        &[mu.weights().as_slice(), nu.weights().as_slice()],
        &cost,
    )?;
    let entries: Vec<(usize, usize, f64)> = sol
        .entries
        .iter()
        .map(|&(flat, mass)| (flat / n, flat % n, mass))
        .collect();
    let total = entries.iter().map(|&(i, j, w)| w * cost[i * n + j]).sum();
    let mut pots = sol.potentials.into_iter();
    let certificate = DualCertificate {
        source_potential: pots.next().unwrap_or_default(),
        target_potential: pots.next().unwrap_or_default(),
        slackness_residual: sol.slackness_residual,
        min_reduced_cost: sol.min_reduced_cost,
    };
    Ok(ExactTransport {
        plan: TransportPlan {
            rows: m,
            cols: n,
            entries,
            cost: total,
        },
        certificate,
    })
}

#[derive(Debug, Clone)]
pub struct EntropicTransport {
    /// Dense `m × n` plan.
    pub plan: DMatrix<f64>,
    /// Unregularized cost `⟨C, π⟩` of the returned plan.
    pub transport_cost: f64,
    /// `⟨C, π⟩ + ε KL(π ‖ μ⊗ν)`.
    pub regularized_cost: f64,
    pub converged: bool,
    pub iterations: usize,
    /// `‖row sums − μ‖₁`, and the same for the columns, whichever is larger.
    pub marginal_error: f64,
    pub log_domain: bool,
}

pub fn w2_discrete_entropic(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    opts: &SinkhornOptions,
) -> Result<EntropicTransport> {
    let cost = squared_distances(mu, nu)?;
    let (m, n) = (mu.len(), nu.len());
    let out = sinkhorn_tensor(
        &[m, n],
        &[mu.weights().as_slice(), nu.weights().as_slice()],
        &cost,
        opts,
    )?;
    Ok(EntropicTransport {
        plan: DMatrix::from_row_slice(m, n, &out.plan),
        transport_cost: out.transport_cost,
        regularized_cost: out.regularized_cost,
        converged: out.converged,
        iterations: out.iterations,
        marginal_error: out.marginal_error,
        log_domain: out.log_domain,
    })
}

/// Closed-form squared W₂ between Gaussians, valid for singular covariances:
/// `|m₁−m₂|² + Tr S₁ + Tr S₂ − 2 Tr (S₁^{1/2} S₂ S₁^{1/2})^{1/2}`.
pub fn w2_gaussian(a: &GaussianMeasure, b: &GaussianMeasure) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(GwbError::dim("Gaussian dimension", a.dim(), b.dim()));
    }
    let mean_term = (a.mean() - b.mean()).norm_squared();
    Ok(mean_term + bures_squared(a.cov(), b.cov())?)
}

/// Squared Bures distance between PSD matrices, clamped at zero.
pub fn bures_squared(s1: &DMatrix<f64>, s2: &DMatrix<f64>) -> Result<f64> {
    let root = linalg::sqrtm(s1)?;
    let cross = linalg::sqrtm(&linalg::symmetrize(&(&root * s2 * &root)))?;
    Ok((s1.trace() + s2.trace() - 2.0 * cross.trace()).max(0.0))
}
