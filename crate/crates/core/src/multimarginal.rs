//! The multi-marginal formulation for discrete marginals.
//!
//! A coupling `π` of `(ν₁, …, ν_p)` with cost
//! `c(x) = Σ λᵢ |xᵢ − Pᵢ B_gen(x)|²`, `B_gen(x) = A⁻¹ Σ λᵢ Pᵢᵀ xᵢ`, has the
//! same optimal value as the barycenter problem, and `B_gen#π*` is a
//! barycenter. Solvers here work on the family reduced to the orthogonal
//! complement of the common kernel and lift their result back to `R^d`.

use nalgebra::{DMatrix, DVector};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;

use crate::error::{GwbError, Result};
use crate::linalg::{kernel_reduction, symmetrize, ProjectionFamily, ReductionResult, Reformulation};
use crate::lp::{solve_transport, tensor_size, unflatten};
use crate::measures::{merge_atoms, objective_f, DiscreteMeasure, Measure, ProblemSpec};
use crate::ot::{w2_discrete_exact, TransportPlan};
use crate::sinkhorn::{sinkhorn_tensor, SinkhornOptions};

/// Largest number of tuples materialized in a cost tensor by default.
pub const DEFAULT_TENSOR_CAP: usize = 2_000_000;
/// Entropic plans keep entries above this fraction of `1 / Π mᵢ` of the mass.
pub const ENTROPIC_KEEP_FRACTION: f64 = 1e-3;
/// Marginal tolerance of a multi-marginal plan.
pub const PLAN_MARGINAL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct MultiMarginalPlan {
    pub shape: Vec<usize>,
    /// `(index tuple, mass)` with positive mass.
    pub entries: Vec<(Vec<usize>, f64)>,
    /// `Σ mass · c(tuple)`.
    pub cost: f64,
}

impl MultiMarginalPlan {
    pub fn marginals(&self) -> Vec<Vec<f64>> {
        let mut sums: Vec<Vec<f64>> = self.shape.iter().map(|&m| vec![0.0; m]).collect();
        for (idx, mass) in &self.entries {
            for (axis, &k) in idx.iter().enumerate() {
                sums[axis][k] += mass;
            }
        }
        sums
    }

    pub fn total_mass(&self) -> f64 {
        self.entries.iter().map(|e| e.1).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Route {
    ExactMm,
    EntropicMm,
    ClassicalMm,
    FreeSupport,
}

impl std::fmt::Display for Route {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Route::ExactMm => "exact-mm",
            Route::EntropicMm => "entropic-mm",
            Route::ClassicalMm => "classical-mm",
            Route::FreeSupport => "free-support",
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Diagnostics {
    pub converged: bool,
    pub iterations: usize,
    /// Cost of the plan the barycenter was recovered from.
    pub plan_cost: Option<f64>,
    pub marginal_error: Option<f64>,
    /// Objective after every outer iteration (free support only).
    pub objective_history: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BarycenterResult {
    pub measure: DiscreteMeasure,
    /// `F(measure)`, evaluated with exact pairwise transport.
    pub objective: f64,
    pub route: Route,
    /// `W₂²(νᵢ, Pᵢ#measure)` for each marginal.
    pub terms: Vec<f64>,
    pub diagnostics: Diagnostics,
}

/// `A⁻¹ Σ λᵢ Pᵢᵀ xᵢ` for a family with invertible `A`.
pub fn b_gen(xs: &[DVector<f64>], family: &ProjectionFamily) -> Result<DVector<f64>> {
    Reformulation::new(family)?.b_gen(xs)
}

/// `Σ λᵢ |xᵢ − Pᵢ B_gen(x)|²`.
pub fn mm_cost(xs: &[DVector<f64>], family: &ProjectionFamily) -> Result<f64> {
    Reformulation::new(family)?.mm_cost(xs)
}

/// Discrete instance reduced to `K^⊥`, with `A` factorized.
struct MmInstance<'a> {
    reduction: ReductionResult,
    reform: Reformulation,
    marginals: Vec<&'a DiscreteMeasure>,
}

impl<'a> MmInstance<'a> {
    fn new(spec: &'a ProblemSpec) -> Result<Self> {
        let marginals = spec.discrete_marginals()?;
        let reduction = kernel_reduction(spec.family())?;
        let reform = Reformulation::new(&reduction.reduced)?;
        Ok(Self {
            reduction,
            reform,
            marginals,
        })
    }

    fn shape(&self) -> Vec<usize> {
        self.marginals.iter().map(|m| m.len()).collect()
    }

    fn check_cap(&self, cap: usize) -> Result<usize> {
        checked_tuples(&self.shape(), cap)
    }

    fn tuple(&self, idx: &[usize]) -> Vec<DVector<f64>> {
        idx.iter()
            .zip(&self.marginals)
            .map(|(&k, m)| m.point(k))
            .collect()
    }

    fn cost_tensor(&self, cap: usize) -> Result<Vec<f64>> {
        let shape = self.shape();
        let n = self.check_cap(cap)?;
        (0..n)
            .map(|flat| self.reform.mm_cost(&self.tuple(&unflatten(flat, &shape))))
            .collect()
    }

    /// `B_gen` of a tuple, lifted to `R^d`.
    fn barycenter_point(&self, idx: &[usize]) -> Result<DVector<f64>> {
        Ok(self.reduction.lift(&self.reform.b_gen(&self.tuple(idx))?))
    }

    fn weights(&self) -> Vec<&[f64]> {
        self.marginals.iter().map(|m| m.weights().as_slice()).collect()
    }

    /// The reformulated marginals `(A^{-1/2}P̄ᵢᵀ)#νᵢ` in `R^{d̄}`.
    fn tilde_marginals(&self) -> Result<Vec<DiscreteMeasure>> {
        self.marginals
            .iter()
            .enumerate()
            .map(|(i, m)| m.pushforward(&self.reform.tilde_map(i)))
            .collect()
    }

    /// Maps a point of the reformulated space back to `R^d`.
    fn lift_tilde(&self, x: &DVector<f64>) -> DVector<f64> {
        self.reduction.lift(&(self.reform.a_inv_sqrt() * x))
    }

    fn constant_c(&self) -> Result<f64> {
        let moments: Vec<DMatrix<f64>> = self.marginals.iter().map(|m| m.second_moment()).collect();
        self.reform.constant_c(&moments)
    }
}

fn checked_tuples(shape: &[usize], cap: usize) -> Result<usize> {
    match tensor_size(shape) {
        Some(n) if n <= cap => Ok(n),
        Some(n) => Err(GwbError::TensorCap { tuples: n, cap }),
        None => Err(GwbError::TensorCap {
            tuples: usize::MAX,
            cap,
        }),
    }
}

/// Exact LP over the full cost tensor.
pub fn solve_mm_exact(spec: &ProblemSpec, cap: usize) -> Result<MultiMarginalPlan> {
    let inst = MmInstance::new(spec)?;
    let shape = inst.shape();
    let cost = inst.cost_tensor(cap)?;
    let sol = solve_transport(&shape, &inst.weights(), &cost)?;
    Ok(MultiMarginalPlan {
        entries: sol
            .entries
            .iter()
            .map(|&(flat, mass)| (unflatten(flat, &shape), mass))
            .collect(),
        shape,
        cost: sol.objective,
    })
}

#[derive(Debug, Clone)]
pub struct EntropicMmPlan {
    /// Dense plan; every tuple carries positive mass.
    pub plan: MultiMarginalPlan,
    pub regularized_cost: f64,
    pub converged: bool,
    pub iterations: usize,
    pub marginal_error: f64,
    pub log_domain: bool,
}

/// Multi-marginal Sinkhorn on the same cost tensor.
pub fn solve_mm_entropic(spec: &ProblemSpec, opts: &SinkhornOptions, cap: usize) -> Result<EntropicMmPlan> {
    let inst = MmInstance::new(spec)?;
    let shape = inst.shape();
    let cost = inst.cost_tensor(cap)?;
    let out = sinkhorn_tensor(&shape, &inst.weights(), &cost, opts)?;
    let entries = out
        .plan
        .iter()
        .enumerate()
        .filter(|(_, &m)| m > 0.0)
        .map(|(flat, &m)| (unflatten(flat, &shape), m))
        .collect();
    Ok(EntropicMmPlan {
        plan: MultiMarginalPlan {
            shape,
            entries,
            cost: out.transport_cost,
        },
        regularized_cost: out.regularized_cost,
        converged: out.converged,
        iterations: out.iterations,
        marginal_error: out.marginal_error,
        log_domain: out.log_domain,
    })
}

/// Keeps entries above `ENTROPIC_KEEP_FRACTION / Π mᵢ` of the total mass and
/// renormalizes. The cost is rescaled accordingly from the kept entries.
pub fn sparsify_entropic(plan: &MultiMarginalPlan, spec: &ProblemSpec) -> Result<MultiMarginalPlan> {
    let inst = MmInstance::new(spec)?;
    let n: f64 = plan.shape.iter().map(|&m| m as f64).product();
    let total = plan.total_mass();
    let threshold = ENTROPIC_KEEP_FRACTION / n * total;
    let kept: Vec<(Vec<usize>, f64)> = plan
        .entries
        .iter()
        .filter(|e| e.1 > threshold)
        .cloned()
        .collect();
    let kept_mass: f64 = kept.iter().map(|e| e.1).sum();
    if kept.is_empty() || kept_mass <= 0.0 {
        return Err(GwbError::Internal("thresholding removed the whole plan".into()));
    }
    let mut cost = 0.0;
    let mut entries = Vec::with_capacity(kept.len());
    for (idx, m) in kept {
        let w = m / kept_mass;
        cost += w * inst.reform.mm_cost(&inst.tuple(&idx))?;
        entries.push((idx, w));
    }
    Ok(MultiMarginalPlan {
        shape: plan.shape.clone(),
        entries,
        cost,
    })
}

fn finish(
    measure: DiscreteMeasure,
    spec: &ProblemSpec,
    route: Route,
    diagnostics: Diagnostics,
) -> Result<BarycenterResult> {
    let obj = objective_f(&Measure::Discrete(measure.clone()), spec)?;
    Ok(BarycenterResult {
        measure,
        objective: obj.total,
        route,
        terms: obj.terms,
        diagnostics,
    })
}

fn push_plan(plan: &MultiMarginalPlan, inst: &MmInstance) -> Result<DiscreteMeasure> {
    let d = inst.reduction.basis.nrows();
    let mut points = DMatrix::zeros(plan.entries.len(), d);
    let mut weights = Vec::with_capacity(plan.entries.len());
    for (r, (idx, mass)) in plan.entries.iter().enumerate() {
        let y = inst.barycenter_point(idx)?;
        points.row_mut(r).copy_from(&y.transpose());
        weights.push(*mass);
    }
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    Ok(merge_atoms(&points, &weights))
}

/// `γ* = B_gen#π`, with `F(γ*)` from exact pairwise transport.
pub fn recover_barycenter(plan: &MultiMarginalPlan, spec: &ProblemSpec, route: Route) -> Result<BarycenterResult> {
    let inst = MmInstance::new(spec)?;
    if plan.shape != inst.shape() {
        return Err(GwbError::InvalidArgument(format!(
            "plan shape {:?} does not match marginal sizes {:?}",
            plan.shape,
            inst.shape()
        )));
    }
    let marg = plan.marginals();
    let mut marginal_error = 0.0_f64;
    for (axis, sums) in marg.iter().enumerate() {
        let w = inst.marginals[axis].weights();
        for (k, s) in sums.iter().enumerate() {
            marginal_error = marginal_error.max((s - w[k]).abs());
        }
    }
    if route != Route::EntropicMm && marginal_error > PLAN_MARGINAL_TOL {
        return Err(GwbError::InvalidArgument(format!(
            "plan marginals deviate from the spec by {marginal_error:e}"
        )));
    }
    let measure = push_plan(plan, &inst)?;
    finish(
        measure,
        spec,
        route,
        Diagnostics {
            converged: true,
            plan_cost: Some(plan.cost),
            marginal_error: Some(marginal_error),
            ..Default::default()
        },
    )
}

/// Exact route: LP, then recovery.
pub fn solve_exact_route(spec: &ProblemSpec, cap: usize) -> Result<BarycenterResult> {
    let plan = solve_mm_exact(spec, cap)?;
    recover_barycenter(&plan, spec, Route::ExactMm)
}

/// Entropic route: Sinkhorn, thresholding, then recovery.
pub fn solve_entropic_route(spec: &ProblemSpec, opts: &SinkhornOptions, cap: usize) -> Result<BarycenterResult> {
    let ent = solve_mm_entropic(spec, opts, cap)?;
    let sparse = sparsify_entropic(&ent.plan, spec)?;
    let mut res = recover_barycenter(&sparse, spec, Route::EntropicMm)?;
    res.diagnostics.converged = ent.converged;
    res.diagnostics.iterations = ent.iterations;
    res.diagnostics.plan_cost = Some(ent.plan.cost);
    res.diagnostics.marginal_error = Some(ent.marginal_error);
    Ok(res)
}

/// Classical multi-marginal problem on the reformulated marginals with cost
/// `Σ λᵢ |x̃ᵢ − Σⱼ λⱼ x̃ⱼ|²`; the barycenter is `A^{-1/2}#(B#π*)`.
pub fn solve_via_classical_mm(spec: &ProblemSpec, cap: usize) -> Result<BarycenterResult> {
    let inst = MmInstance::new(spec)?;
    let tilde = inst.tilde_marginals()?;
    let weights = inst.reform.family().weights();
    let shape: Vec<usize> = tilde.iter().map(|m| m.len()).collect();
    let n = checked_tuples(&shape, cap)?;
    let dbar = inst.reduction.reduced_dim;
    let average = |idx: &[usize]| {
        idx.iter()
            .enumerate()
            .fold(DVector::zeros(dbar), |acc, (i, &k)| acc + tilde[i].point(k) * weights[i])
    };
    let cost: Vec<f64> = (0..n)
        .map(|flat| {
            let idx = unflatten(flat, &shape);
            let avg = average(&idx);
            idx.iter()
                .enumerate()
                .map(|(i, &k)| weights[i] * (tilde[i].point(k) - &avg).norm_squared())
                .sum()
        })
        .collect();
    let marg: Vec<&[f64]> = tilde.iter().map(|m| m.weights().as_slice()).collect();
    let sol = solve_transport(&shape, &marg, &cost)?;

    let d = inst.reduction.basis.nrows();
    let mut points = DMatrix::zeros(sol.entries.len(), d);
    let mut masses = Vec::with_capacity(sol.entries.len());
    for (r, &(flat, mass)) in sol.entries.iter().enumerate() {
        let y = inst.lift_tilde(&average(&unflatten(flat, &shape)));
        points.row_mut(r).copy_from(&y.transpose());
        masses.push(mass);
    }
    let total: f64 = masses.iter().sum();
    masses.iter_mut().for_each(|w| *w /= total);
    let measure = merge_atoms(&points, &masses);
    let c = inst.constant_c()?;
    finish(
        measure,
        spec,
        Route::ClassicalMm,
        Diagnostics {
            converged: true,
            plan_cost: Some(sol.objective + c),
            ..Default::default()
        },
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct FreeSupportOptions {
    pub n_atoms: usize,
    /// Initial atoms in `R^d` (`n_atoms × d`). When absent, several
    /// comonotone starts are tried and the best result is kept.
    pub init: Option<DMatrix<f64>>,
    pub max_iter: usize,
    /// Stop when no atom moves by more than `tol`.
    pub tol: f64,
    /// Extra starts along random directions, on top of the principal ones.
    pub random_starts: usize,
}

impl Default for FreeSupportOptions {
    fn default() -> Self {
        Self {
            n_atoms: 16,
            init: None,
            max_iter: 200,
            tol: 1e-10,
            random_starts: 32,
        }
    }
}

struct FreeSupportRun {
    atoms: DMatrix<f64>,
    history: Vec<f64>,
    converged: bool,
    iterations: usize,
}

/// Atom `j` is the `λ`-weighted average of the `(j + ½)/n` quantiles of the
/// reformulated marginals, each sorted along `direction`.
fn comonotone_start(tilde: &[DiscreteMeasure], weights: &[f64], direction: &DVector<f64>, n: usize) -> DMatrix<f64> {
    let dbar = direction.len();
    let mut x = DMatrix::zeros(n, dbar);
    for (nu, &w) in tilde.iter().zip(weights) {
        let mut order: Vec<usize> = (0..nu.len()).collect();
        let key = |k: usize| nu.points().row(k).dot(&direction.transpose());
        order.sort_by(|&a, &b| key(a).total_cmp(&key(b)));
        let mut cumulative = 0.0;
        let mut pos = 0;
        for j in 0..n {
            let level = (j as f64 + 0.5) / n as f64;
            while pos + 1 < order.len() && cumulative + nu.weights()[order[pos]] < level {
                cumulative += nu.weights()[order[pos]];
                pos += 1;
            }
            let mut row = x.row_mut(j);
            row += nu.points().row(order[pos]) * w;
        }
    }
    x
}

fn alternate(
    tilde: &[DiscreteMeasure],
    weights: &[f64],
    c: f64,
    mut x: DMatrix<f64>,
    opts: &FreeSupportOptions,
) -> Result<FreeSupportRun> {
    let (n, dbar) = x.shape();
    let uniform = DVector::from_element(n, 1.0 / n as f64);
    let mut history = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    let mut last_g = f64::INFINITY;
    for iter in 1..=opts.max_iter {
        iterations = iter;
        let mu = DiscreteMeasure::new(x.clone(), uniform.clone())?;
        let plans: Vec<TransportPlan> = tilde
            .iter()
            .map(|nu| w2_discrete_exact(&mu, nu).map(|t| t.plan))
            .collect::<Result<_>>()?;
        let g: f64 = plans.iter().zip(weights).map(|(p, w)| w * p.cost).sum();
        if g > last_g + 1e-12 * (1.0 + last_g.abs()) {
            return Err(GwbError::Internal(format!(
                "free-support objective increased from {last_g:e} to {g:e}"
            )));
        }
        last_g = g;
        history.push(g + c);

        let mut next = DMatrix::zeros(n, dbar);
        for ((plan, nu), &w) in plans.iter().zip(tilde).zip(weights) {
            for &(j, k, mass) in &plan.entries {
                let mut row = next.row_mut(j);
                row += nu.points().row(k) * (w * mass / uniform[j]);
            }
        }
        let moved = (0..n)
            .map(|j| (next.row(j) - x.row(j)).norm())
            .fold(0.0, f64::max);
        x = next;
        if moved < opts.tol {
            converged = true;
            break;
        }
    }
    Ok(FreeSupportRun {
        atoms: x,
        history,
        converged,
        iterations,
    })
}

/// Uniform-weight barycenter whose atom locations are optimized by
/// alternating exact plans to each reformulated marginal with a move of every
/// atom to the weighted mean of its barycentric targets.
///
/// Without an explicit `init`, the scheme starts from comonotone couplings
/// along the principal axes of `Σ λᵢ Cov(ν̃ᵢ)` and along `random_starts`
/// random directions drawn from `rng`, and keeps the lowest objective.
pub fn free_support_barycenter<R: Rng + ?Sized>(
    spec: &ProblemSpec,
    opts: &FreeSupportOptions,
    rng: &mut R,
) -> Result<BarycenterResult> {
    if opts.n_atoms == 0 {
        return Err(GwbError::InvalidArgument("free support needs at least one atom".into()));
    }
    let inst = MmInstance::new(spec)?;
    let tilde = inst.tilde_marginals()?;
    let weights = inst.reform.family().weights().to_vec();
    let dbar = inst.reduction.reduced_dim;
    let d = inst.reduction.basis.nrows();
    let n = opts.n_atoms;
    let c = inst.constant_c()?;

    let starts: Vec<DMatrix<f64>> = match &opts.init {
        Some(init) => {
            if init.nrows() != n || init.ncols() != d {
                return Err(GwbError::dim("initial cloud rows", n, init.nrows()));
            }
            let to_tilde = inst.reform.a_sqrt() * inst.reduction.basis.transpose();
            vec![(to_tilde * init.transpose()).transpose()]
        }
        None => {
            let mut cov = DMatrix::zeros(dbar, dbar);
            for (nu, &w) in tilde.iter().zip(&weights) {
                let m = nu.mean();
                cov += (nu.second_moment() - &m * m.transpose()) * w;
            }
            let eig = symmetrize(&cov).symmetric_eigen();
            let mut directions: Vec<DVector<f64>> =
                eig.eigenvectors.column_iter().map(|v| v.into_owned()).collect();
            directions.retain(|v| v.norm() > 0.0);
            let mut starts: Vec<DMatrix<f64>> = directions
                .iter()
                .map(|v| comonotone_start(&tilde, &weights, v, n))
                .collect();
            let samplers = tilde
                .iter()
                .map(|m| WeightedIndex::new(m.weights().iter().copied()))
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| GwbError::InvalidWeights(e.to_string()))?;
            for _ in 0..opts.random_starts {
                let mut x = DMatrix::zeros(n, dbar);
                for j in 0..n {
                    for ((nu, s), &w) in tilde.iter().zip(&samplers).zip(&weights) {
                        let mut row = x.row_mut(j);
                        row += nu.points().row(s.sample(rng)) * w;
                    }
                }
                starts.push(x);
            }
            starts
        }
    };

    let mut best: Option<FreeSupportRun> = None;
    for x0 in starts {
        let run = alternate(&tilde, &weights, c, x0, opts)?;
        let value = run.history.last().copied().unwrap_or(f64::INFINITY);
        if best
            .as_ref()
            .is_none_or(|b| value < b.history.last().copied().unwrap_or(f64::INFINITY))
        {
            best = Some(run);
        }
    }
    let run = best.expect("at least one start");

    let mut points = DMatrix::zeros(n, d);
    for j in 0..n {
        let y = inst.lift_tilde(&run.atoms.row(j).transpose());
        points.row_mut(j).copy_from(&y.transpose());
    }
    let measure = merge_atoms(&points, &vec![1.0 / n as f64; n]);
    finish(
        measure,
        spec,
        Route::FreeSupport,
        Diagnostics {
            converged: run.converged,
            iterations: run.iterations,
            objective_history: run.history,
            ..Default::default()
        },
    )
}

/// Displacement interpolation along an optimal plan: the image of the plan
/// under `(x, y) ↦ (1−t)x + ty`.
pub fn interpolate_p2(
    plan: &TransportPlan,
    source: &DiscreteMeasure,
    target: &DiscreteMeasure,
    t: f64,
) -> Result<DiscreteMeasure> {
    if !(0.0..=1.0).contains(&t) {
        return Err(GwbError::InvalidArgument(format!("t = {t} is outside [0, 1]")));
    }
    if source.dim() != target.dim() {
        return Err(GwbError::dim("interpolation endpoints", source.dim(), target.dim()));
    }
    if plan.rows != source.len() || plan.cols != target.len() {
        return Err(GwbError::dim("plan rows", source.len(), plan.rows));
    }
    if t == 0.0 {
        return Ok(source.clone());
    }
    if t == 1.0 {
        return Ok(target.clone());
    }
    let mut points = DMatrix::zeros(plan.entries.len(), source.dim());
    let mut masses = Vec::with_capacity(plan.entries.len());
    for (r, &(i, j, m)) in plan.entries.iter().enumerate() {
        let p = source.points().row(i) * (1.0 - t) + target.points().row(j) * t;
        points.row_mut(r).copy_from(&p);
        masses.push(m);
    }
    let total: f64 = masses.iter().sum();
    masses.iter_mut().for_each(|w| *w /= total);
    Ok(merge_atoms(&points, &masses))
}
