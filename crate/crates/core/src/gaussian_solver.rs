//! Gaussian marginals: fixed-point iteration on covariances, residuals of
//! the covariance fixed-point equations, the uniqueness rank test and the
//! end-to-end Gaussian pipeline.
//!
//! Everything is solved in the reformulated space where the marginals become
//! `ν̃ᵢ = N(A^{-1/2}Pᵢᵀmᵢ, K̃ᵢ)` with `K̃ᵢ = A^{-1/2}PᵢᵀSᵢPᵢA^{-1/2}` and the
//! problem is an ordinary barycenter; covariances are mapped back with
//! `S = A^{-1/2} K A^{-1/2}`.

use nalgebra::{DMatrix, DVector};

use crate::error::{GwbError, Result};
use crate::linalg::{self, kernel_reduction, symmetrize, ProjectionFamily, Reformulation};
use crate::measures::{objective_f, GaussianMeasure, Measure, Objective, ProblemSpec};
use crate::ot::bures_squared;

/// Slack allowed on the decrease of `G(K_n)` between two iterates.
pub const MONOTONE_SLACK: f64 = 1e-10;
/// An iterate is treated as singular below this ratio of its eigenvalues.
/// Kept above the rank cutoff of `psd_sqrt` so that every iterate accepted
/// here has a full-rank square root.
pub const DEFINITENESS_RATIO: f64 = 2.0 * linalg::RANK_TOL;

#[derive(Debug, Clone, PartialEq)]
pub struct FixedPointOptions {
    /// Stop when `‖K_{n+1} − K_n‖_F ≤ tol · (1 + ‖K_n‖_F)`.
    pub tol: f64,
    pub max_iter: usize,
    /// Keep every `keep_every`-th iterate in the trace (0 keeps none).
    pub keep_every: usize,
}

impl Default for FixedPointOptions {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            max_iter: 5000,
            keep_every: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FixedPointStatus {
    Converged,
    MaxIterations,
    /// An iterate lost positive definiteness; the trace ends at the last
    /// definite iterate.
    LostDefiniteness,
}

#[derive(Debug, Clone)]
pub struct FixedPointTrace {
    pub iterates: Vec<DMatrix<f64>>,
    /// `G(K_n)` for every iterate, starting with `K₀`.
    pub objectives: Vec<f64>,
    pub status: FixedPointStatus,
    pub iterations: usize,
    /// `‖K − Σ λᵢ (K^{1/2} K̃ᵢ K^{1/2})^{1/2}‖_F` at the final iterate.
    pub residual: f64,
}

impl FixedPointTrace {
    pub fn converged(&self) -> bool {
        self.status == FixedPointStatus::Converged
    }

    pub fn is_monotone(&self, slack: f64) -> bool {
        self.objectives.windows(2).all(|w| w[1] <= w[0] + slack)
    }
}

/// `G(K) = Σ λᵢ W₂²(N(0,K̃ᵢ), N(0,K))`.
pub fn g_value(k_tildes: &[DMatrix<f64>], weights: &[f64], k: &DMatrix<f64>) -> Result<f64> {
    let mut g = 0.0;
    for (kt, &w) in k_tildes.iter().zip(weights) {
        g += w * bures_squared(kt, k)?;
    }
    Ok(g)
}

/// `Σ λᵢ (R K̃ᵢ R)^{1/2}` for a given square root `R = K^{1/2}`.
fn averaged_roots(k_tildes: &[DMatrix<f64>], weights: &[f64], root: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let d = root.nrows();
    let mut acc = DMatrix::zeros(d, d);
    for (kt, &w) in k_tildes.iter().zip(weights) {
        acc += linalg::sqrtm(&symmetrize(&(root * kt * root)))? * w;
    }
    Ok(symmetrize(&acc))
}

/// Residual of `K = Σ λᵢ (K^{1/2} K̃ᵢ K^{1/2})^{1/2}`.
pub fn covariance_residual(k_tildes: &[DMatrix<f64>], weights: &[f64], k: &DMatrix<f64>) -> Result<f64> {
    let root = linalg::sqrtm(k)?;
    Ok((k - averaged_roots(k_tildes, weights, &root)?).norm())
}

/// One step `L(K) = K^{-1/2} (Σ λᵢ (K^{1/2} K̃ᵢ K^{1/2})^{1/2})² K^{-1/2}` for
/// positive definite `K`.
pub fn fixed_point_map(k_tildes: &[DMatrix<f64>], weights: &[f64], k: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let root = linalg::psd_sqrt(k)?;
    if root.rank < k.nrows() {
        return Err(GwbError::NotPositiveDefinite("fixed-point map needs K > 0".into()));
    }
    let m = averaged_roots(k_tildes, weights, &root.sqrt)?;
    Ok(symmetrize(
        &(&root.inv_sqrt_on_image * &m * &m * &root.inv_sqrt_on_image),
    ))
}

fn is_definite(k: &DMatrix<f64>) -> bool {
    let (lo, hi) = linalg::eigen_range(k);
    hi > 0.0 && lo >= DEFINITENESS_RATIO * hi
}

/// Iterates `K_{n+1} = L(K_n)` on the reformulated covariances `K̃ᵢ`.
pub fn iterate_fixed_point(
    k_tildes: &[DMatrix<f64>],
    weights: &[f64],
    k0: &DMatrix<f64>,
    opts: &FixedPointOptions,
) -> Result<(DMatrix<f64>, FixedPointTrace)> {
    if k_tildes.len() != weights.len() || k_tildes.is_empty() {
        return Err(GwbError::dim("number of covariances", weights.len(), k_tildes.len()));
    }
    let d = k0.nrows();
    if let Some(bad) = k_tildes.iter().find(|k| k.nrows() != d || k.ncols() != d) {
        return Err(GwbError::dim("reformulated covariance", d, bad.nrows()));
    }
    let k0 = symmetrize(k0);
    if !is_definite(&k0) {
        return Err(GwbError::NotPositiveDefinite("initial iterate K0".into()));
    }

    let keep = |n: usize| opts.keep_every > 0 && n.is_multiple_of(opts.keep_every);
    let mut k = k0;
    let mut g = g_value(k_tildes, weights, &k)?;
    let mut trace = FixedPointTrace {
        iterates: if keep(0) { vec![k.clone()] } else { vec![] },
        objectives: vec![g],
        status: FixedPointStatus::MaxIterations,
        iterations: 0,
        residual: f64::NAN,
    };

    for n in 1..=opts.max_iter {
        let next = fixed_point_map(k_tildes, weights, &k)?;
        if !is_definite(&next) {
            trace.status = FixedPointStatus::LostDefiniteness;
            break;
        }
        let g_next = g_value(k_tildes, weights, &next)?;
        if g_next > g + MONOTONE_SLACK {
            return Err(GwbError::Internal(format!(
                "G increased from {g:e} to {g_next:e} at iteration {n}"
            )));
        }
        let step = (&next - &k).norm();
        let scale = 1.0 + k.norm();
        k = next;
        g = g_next;
        trace.iterations = n;
        trace.objectives.push(g);
        if keep(n) {
            trace.iterates.push(k.clone());
        }
        if step <= opts.tol * scale {
            trace.status = FixedPointStatus::Converged;
            break;
        }
    }
    if opts.keep_every > 0 && !trace.iterations.is_multiple_of(opts.keep_every) {
        trace.iterates.push(k.clone());
    }
    trace.residual = covariance_residual(k_tildes, weights, &k)?;
    Ok((k, trace))
}

/// Gaussian instance on a family whose `A` is invertible, with the
/// reformulated covariances cached.
#[derive(Debug, Clone)]
pub struct GaussianGwbInstance {
    reform: Reformulation,
    marginals: Vec<GaussianMeasure>,
    k_tildes: Vec<DMatrix<f64>>,
}

impl GaussianGwbInstance {
    pub fn new(family: &ProjectionFamily, marginals: Vec<GaussianMeasure>) -> Result<Self> {
        if marginals.len() != family.len() {
            return Err(GwbError::dim("number of marginals", family.len(), marginals.len()));
        }
        for (i, g) in marginals.iter().enumerate() {
            if g.dim() != family.target_dim(i) {
                return Err(GwbError::dim(format!("marginal {i}"), family.target_dim(i), g.dim()));
            }
        }
        let reform = Reformulation::new(family)?;
        let k_tildes = marginals
            .iter()
            .enumerate()
            .map(|(i, g)| {
                let t = reform.tilde_map(i);
                symmetrize(&(&t * g.cov() * t.transpose()))
            })
            .collect();
        Ok(Self {
            reform,
            marginals,
            k_tildes,
        })
    }

    pub fn family(&self) -> &ProjectionFamily {
        self.reform.family()
    }

    pub fn reformulation(&self) -> &Reformulation {
        &self.reform
    }

    pub fn marginals(&self) -> &[GaussianMeasure] {
        &self.marginals
    }

    pub fn k_tildes(&self) -> &[DMatrix<f64>] {
        &self.k_tildes
    }

    /// `K = A^{1/2} S A^{1/2}`.
    pub fn to_k(&self, s: &DMatrix<f64>) -> DMatrix<f64> {
        let r = self.reform.a_sqrt();
        symmetrize(&(r * s * r))
    }

    /// `S = A^{-1/2} K A^{-1/2}`.
    pub fn to_s(&self, k: &DMatrix<f64>) -> DMatrix<f64> {
        let r = self.reform.a_inv_sqrt();
        symmetrize(&(r * k * r))
    }

    pub fn mean(&self) -> Result<DVector<f64>> {
        let means: Vec<DVector<f64>> = self.marginals.iter().map(|g| g.mean().clone()).collect();
        self.reform.b_gen(&means)
    }

    fn all_definite(&self) -> bool {
        self.marginals.iter().all(|g| is_definite(g.cov()))
    }
}

#[derive(Debug, Clone)]
pub struct FixedPointSolution {
    pub measure: GaussianMeasure,
    /// Final iterate in the reformulated space.
    pub k: DMatrix<f64>,
    pub trace: FixedPointTrace,
}

/// Runs the covariance iteration from `K₀` (identity by default) and maps the
/// limit back to `N(B_gen(m), A^{-1/2} K A^{-1/2})`.
pub fn gaussian_fixed_point(
    instance: &GaussianGwbInstance,
    k0: Option<&DMatrix<f64>>,
    opts: &FixedPointOptions,
) -> Result<FixedPointSolution> {
    if !instance.all_definite() {
        return Err(GwbError::NotPositiveDefinite(
            "every marginal covariance must be positive definite".into(),
        ));
    }
    let d = instance.family().dim();
    let weights = instance.family().weights();
    let avg = instance
        .k_tildes
        .iter()
        .zip(weights)
        .fold(DMatrix::zeros(d, d), |acc, (k, w)| acc + k * *w);
    if !is_definite(&avg) {
        return Err(GwbError::Internal(
            "weighted average of reformulated covariances is singular".into(),
        ));
    }
    let identity = DMatrix::identity(d, d);
    let k0 = k0.unwrap_or(&identity);
    if k0.nrows() != d || k0.ncols() != d {
        return Err(GwbError::dim("initial iterate", d, k0.nrows()));
    }
    let (k, trace) = iterate_fixed_point(&instance.k_tildes, weights, k0, opts)?;
    let measure = GaussianMeasure::new(instance.mean()?, instance.to_s(&k))?;
    Ok(FixedPointSolution { measure, k, trace })
}

/// `‖K − Σ λᵢ (K^{1/2} K̃ᵢ K^{1/2})^{1/2}‖_F` with `K = A^{1/2} S A^{1/2}`.
pub fn fixed_point_residual(instance: &GaussianGwbInstance, s: &DMatrix<f64>) -> Result<f64> {
    covariance_residual(&instance.k_tildes, instance.family().weights(), &instance.to_k(s))
}

/// Residual of `S^{1/2} A S^{1/2} = Σ λᵢ (S^{1/2} PᵢᵀSᵢPᵢ S^{1/2})^{1/2}`,
/// defined for invertible `S` only.
pub fn residual_pointfixe2(instance: &GaussianGwbInstance, s: &DMatrix<f64>) -> Result<f64> {
    if !is_definite(s) {
        return Err(GwbError::NotPositiveDefinite(
            "this form of the fixed-point equation needs an invertible S".into(),
        ));
    }
    let root = linalg::sqrtm(s)?;
    let family = instance.family();
    let lhs = symmetrize(&(&root * instance.reform.a() * &root));
    let mut rhs = DMatrix::zeros(s.nrows(), s.ncols());
    for (i, g) in instance.marginals.iter().enumerate() {
        let p = family.map(i);
        let inner = symmetrize(&(&root * p.transpose() * g.cov() * p * &root));
        rhs += linalg::sqrtm(&inner)? * family.weight(i);
    }
    Ok((lhs - rhs).norm())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UniquenessReport {
    pub unique: bool,
    pub rank: usize,
    pub required: usize,
}

impl std::fmt::Display for UniquenessReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "rank {}/{}: {}",
            self.rank,
            self.required,
            if self.unique { "unique" } else { "non-unique" }
        )
    }
}

/// Rank of the span of `u uᵀ' + u' uᵀ` over pairs of rows `u, u'` of each
/// `Pᵢ`, inside the `d(d+1)/2`-dimensional space of symmetric matrices. The
/// centered Gaussian solution is unique iff the span is full.
pub fn uniqueness_check(family: &ProjectionFamily) -> UniquenessReport {
    let d = family.dim();
    let required = d * (d + 1) / 2;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for p in family.maps() {
        for k in 0..p.nrows() {
            for m in k..p.nrows() {
                let (u, v) = (p.row(k), p.row(m));
                let mut vec = Vec::with_capacity(required);
                for a in 0..d {
                    for b in a..d {
                        let c = u[a] * v[b] + v[a] * u[b];
                        vec.push(if a == b { c } else { c * std::f64::consts::SQRT_2 });
                    }
                }
                rows.push(vec);
            }
        }
    }
    let mat = DMatrix::from_fn(rows.len(), required, |i, j| rows[i][j]);
    let sv: Vec<f64> = mat.singular_values().iter().cloned().collect();
    let rank = linalg::numerical_rank(&sv);
    UniquenessReport {
        unique: rank == required,
        rank,
        required,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianOptions {
    pub fixed_point: FixedPointOptions,
    /// Added as `η I` to every marginal covariance when positive.
    pub regularization: f64,
    /// Initial iterate in the reduced reformulated space (`d̄ × d̄`).
    pub k0: Option<DMatrix<f64>>,
}

impl Default for GaussianOptions {
    fn default() -> Self {
        Self {
            fixed_point: FixedPointOptions::default(),
            regularization: 0.0,
            k0: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GaussianSolution {
    pub measure: GaussianMeasure,
    pub trace: FixedPointTrace,
    pub uniqueness: UniquenessReport,
    /// The final `K` is positive definite, so the result is a minimizer;
    /// otherwise it is only known to be a local minimizer among Gaussians
    /// with the same image space.
    pub certified: bool,
    pub objective: Objective,
    pub regularized: bool,
}

/// Mean via `B_gen`, covariance via the fixed-point iteration on the reduced
/// family, result lifted back to `R^d`.
pub fn solve_gaussian_gwb(spec: &ProblemSpec, opts: &GaussianOptions) -> Result<GaussianSolution> {
    let marginals = spec.gaussian_marginals()?;
    if !(opts.regularization >= 0.0 && opts.regularization.is_finite()) {
        return Err(GwbError::InvalidArgument("regularization must be non-negative".into()));
    }
    let regularized = opts.regularization > 0.0;
    let mut prepared = Vec::with_capacity(marginals.len());
    for (i, g) in marginals.iter().enumerate() {
        let cov = if regularized {
            g.cov() + DMatrix::identity(g.dim(), g.dim()) * opts.regularization
        } else {
            g.cov().clone()
        };
        if !is_definite(&cov) {
            return Err(GwbError::NotPositiveDefinite(format!(
                "covariance of marginal {i} is singular; pass a positive regularization"
            )));
        }
        prepared.push(GaussianMeasure::new(g.mean().clone(), cov)?);
    }

    let reduction = kernel_reduction(spec.family())?;
    let instance = GaussianGwbInstance::new(&reduction.reduced, prepared)?;
    let sol = gaussian_fixed_point(&instance, opts.k0.as_ref(), &opts.fixed_point)?;
    let q = &reduction.basis;
    let measure = GaussianMeasure::new(q * sol.measure.mean(), symmetrize(&(q * sol.measure.cov() * q.transpose())))?;
    let certified = sol.trace.status != FixedPointStatus::LostDefiniteness && is_definite(&sol.k);
    let objective = objective_f(&Measure::Gaussian(measure.clone()), spec)?;
    Ok(GaussianSolution {
        measure,
        trace: sol.trace,
        uniqueness: uniqueness_check(spec.family()),
        certified,
        objective,
        regularized,
    })
}
