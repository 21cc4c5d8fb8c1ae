//! MW₂ between Gaussian mixtures (transport restricted to mixture couplings,
//! which reduces to a transportation problem over components) and generalized
//! barycenters of mixture marginals.
//!
//! The barycenter is computed in the reformulated space: every component of
//! `νᵢ` is pushed by `A^{-1/2}Pᵢᵀ`, each tuple of components gets its own
//! Gaussian barycenter, and a multi-marginal LP over component tuples picks
//! the tuple masses. The result is mapped back by `A^{-1/2}`.

use nalgebra::{DMatrix, DVector};

use crate::error::{GwbError, Result};
use crate::gaussian_solver::{iterate_fixed_point, FixedPointOptions, FixedPointStatus};
use crate::linalg::{self, kernel_reduction, symmetrize, Reformulation};
use crate::lp::{solve_transport, tensor_size, unflatten};
use crate::measures::{objective_f, GaussianMeasure, GaussianMixture, Measure, Objective, ProblemSpec};
use crate::multimarginal::DEFAULT_TENSOR_CAP;
use crate::ot::{bures_squared, w2_gaussian};

/// Components lighter than this are dropped from a barycenter.
pub const PRUNE_WEIGHT: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct MixtureCoupling {
    /// `(component of g₁, component of g₂, mass)`.
    pub entries: Vec<(usize, usize, f64)>,
    /// `MW₂²`.
    pub cost: f64,
}

/// Exactly symmetric: the arguments are put in a canonical order before
/// solving, and the coupling is transposed back if needed.
pub fn mw2(g1: &GaussianMixture, g2: &GaussianMixture) -> Result<MixtureCoupling> {
    if g1.dim() != g2.dim() {
        return Err(GwbError::dim("mixture dimension", g1.dim(), g2.dim()));
    }
    if precedes(&canonical_key(g2), &canonical_key(g1)) {
        let mut c = mw2_ordered(g2, g1)?;
        for e in &mut c.entries {
            *e = (e.1, e.0, e.2);
        }
        c.entries.sort_by_key(|e| (e.0, e.1));
        return Ok(c);
    }
    mw2_ordered(g1, g2)
}

fn canonical_key(g: &GaussianMixture) -> Vec<f64> {
    let mut key = g.weights().to_vec();
    for c in g.components() {
        key.extend(c.mean().iter().chain(c.cov().iter()));
    }
    key
}

fn precedes(a: &[f64], b: &[f64]) -> bool {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            std::cmp::Ordering::Less => return true,
            std::cmp::Ordering::Greater => return false,
            std::cmp::Ordering::Equal => {}
        }
    }
    a.len() < b.len()
}

fn mw2_ordered(g1: &GaussianMixture, g2: &GaussianMixture) -> Result<MixtureCoupling> {
    let (m, n) = (g1.len(), g2.len());
    let mut cost = Vec::with_capacity(m * n);
    for a in g1.components() {
        for b in g2.components() {
            cost.push(w2_gaussian(a, b)?);
        }
    }
    let sol = solve_transport(&[m, n], &[g1.weights(), g2.weights()], &cost)?;
    let entries: Vec<(usize, usize, f64)> = sol
        .entries
        .iter()
        .map(|&(flat, mass)| (flat / n, flat % n, mass))
        .collect();
    let total = entries.iter().map(|&(k, l, w)| w * cost[k * n + l]).sum();
    Ok(MixtureCoupling {
        entries,
        cost: total,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct GmmOptions {
    pub fixed_point: FixedPointOptions,
    /// Added as `η I` to singular component covariances; zero rejects them.
    pub regularization: f64,
    pub tensor_cap: usize,
}

impl Default for GmmOptions {
    fn default() -> Self {
        Self {
            fixed_point: FixedPointOptions {
                keep_every: 0,
                ..FixedPointOptions::default()
            },
            regularization: 0.0,
            tensor_cap: DEFAULT_TENSOR_CAP,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GmmSolution {
    pub mixture: GaussianMixture,
    /// `Σ λᵢ MW₂²(νᵢ, Pᵢ#γ)` of the returned mixture.
    pub objective: Objective,
    /// Optimal value of the component-tuple LP in the reformulated space.
    pub tuple_cost: f64,
    /// Number of components that needed `η I` added.
    pub regularized_components: usize,
    /// Tuple barycenters whose iteration hit the iteration cap.
    pub unconverged_tuples: usize,
}

struct TupleBarycenter {
    mean: DVector<f64>,
    k: DMatrix<f64>,
}

pub fn gmm_gwb(spec: &ProblemSpec, opts: &GmmOptions) -> Result<GmmSolution> {
    let mixtures = spec.mixture_marginals()?;
    let reduction = kernel_reduction(spec.family())?;
    let family = &reduction.reduced;
    let reform = Reformulation::new(family)?;
    let weights = family.weights();
    let d = family.dim();

    let mut regularized_components = 0;
    let mut tilde: Vec<Vec<(DVector<f64>, DMatrix<f64>)>> = Vec::with_capacity(mixtures.len());
    for (i, g) in mixtures.iter().enumerate() {
        let t = reform.tilde_map(i);
        let mut comps = Vec::with_capacity(g.len());
        for (k, c) in g.components().iter().enumerate() {
            let (lo, hi) = linalg::eigen_range(c.cov());
            let cov = if hi > 0.0 && lo > linalg::RANK_TOL * hi {
                c.cov().clone()
            } else if opts.regularization > 0.0 {
                regularized_components += 1;
                c.cov() + DMatrix::identity(c.dim(), c.dim()) * opts.regularization
            } else {
                return Err(GwbError::NotPositiveDefinite(format!(
                    "component {k} of marginal {i} is singular; pass a positive regularization"
                )));
            };
            comps.push((&t * c.mean(), symmetrize(&(&t * cov * t.transpose()))));
        }
        tilde.push(comps);
    }

    let shape: Vec<usize> = mixtures.iter().map(|g| g.len()).collect();
    let n = tensor_size(&shape).unwrap_or(usize::MAX);
    if n > opts.tensor_cap {
        return Err(GwbError::TensorCap {
            tuples: n,
            cap: opts.tensor_cap,
        });
    }

    let mut unconverged_tuples = 0;
    let mut cost = Vec::with_capacity(n);
    let mut barycenters = Vec::with_capacity(n);
    for flat in 0..n {
        let idx = unflatten(flat, &shape);
        let comps: Vec<&(DVector<f64>, DMatrix<f64>)> =
            idx.iter().enumerate().map(|(i, &k)| &tilde[i][k]).collect();
        let k_tildes: Vec<DMatrix<f64>> = comps.iter().map(|c| c.1.clone()).collect();
        let mean = comps
            .iter()
            .zip(weights)
            .fold(DVector::zeros(d), |acc, (c, w)| acc + &c.0 * *w);
        let start = k_tildes
            .iter()
            .zip(weights)
            .fold(DMatrix::zeros(d, d), |acc, (k, w)| acc + k * *w);
        let (k, trace) = iterate_fixed_point(&k_tildes, weights, &start, &opts.fixed_point)?;
        if trace.status != FixedPointStatus::Converged {
            unconverged_tuples += 1;
        }
        let mut c = 0.0;
        for (comp, &w) in comps.iter().zip(weights) {
            c += w * ((&comp.0 - &mean).norm_squared() + bures_squared(&comp.1, &k)?);
        }
        cost.push(c);
        barycenters.push(TupleBarycenter { mean, k });
    }

    let marginal_weights: Vec<&[f64]> = mixtures.iter().map(|g| g.weights()).collect();
    let sol = solve_transport(&shape, &marginal_weights, &cost)?;

    let q = &reduction.basis;
    let back = reform.a_inv_sqrt();
    let kept: Vec<&(usize, f64)> = sol.entries.iter().filter(|e| e.1 >= PRUNE_WEIGHT).collect();
    let total: f64 = kept.iter().map(|e| e.1).sum();
    let mut components = Vec::with_capacity(kept.len());
    let mut comp_weights = Vec::with_capacity(kept.len());
    for &&(flat, mass) in &kept {
        let b = &barycenters[flat];
        let mean = q * (back * &b.mean);
        let cov = q * symmetrize(&(back * &b.k * back)) * q.transpose();
        components.push(GaussianMeasure::new(mean, symmetrize(&cov))?);
        comp_weights.push(mass / total);
    }
    let mixture = GaussianMixture::new(components, comp_weights)?;
    let objective = objective_f(&Measure::Mixture(mixture.clone()), spec)?;
    Ok(GmmSolution {
        mixture,
        objective,
        tuple_cost: sol.objective,
        regularized_components,
        unconverged_tuples,
    })
}
