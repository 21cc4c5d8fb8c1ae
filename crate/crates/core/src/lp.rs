//! Exact solver for multi-index transportation problems
//!
//! ```text
//! minimize   Σ_j c_j π_j        over tuples j = (k₁, …, k_p)
//! subject to Σ_{j : k_i = k} π_j = a_i(k)   for every axis i and index k
//!            π ≥ 0
//! ```
//!
//! This is a revised primal simplex that exploits the column structure: every
//! tuple column has exactly one unit entry per axis, so pricing a column costs
//! `p` additions and the whole cost tensor is priced in one sweep. The
//! constraint matrix has rank `Σ mᵢ − p + 1`; the first row of every axis
//! after the first is dropped to make it full rank. The starting basis comes
//! from the multi-index north-west corner rule, which is triangular in that
//! row ordering.
//!
//! The pairwise transportation problem is the `p = 2` case.

use nalgebra::{DMatrix, DVector};

use crate::error::{GwbError, Result};

/// Basic variables at or below this mass are degenerate pivots carrying
/// roundoff and are left out of the support.
pub const DEGENERATE_MASS: f64 = 1e-14;

/// Optimal vertex together with the dual potentials that certify it.
#[derive(Debug, Clone)]
pub struct LpSolution {
    /// `(flat tuple index, mass)` for every basic variable with mass above
    /// [`DEGENERATE_MASS`].
    pub entries: Vec<(usize, f64)>,
    pub objective: f64,
    /// One potential per axis and index; `c_j ≥ Σ_i potentials[i][k_i]` at
    /// optimality with equality on the support.
    pub potentials: Vec<Vec<f64>>,
    /// `max |c_j − Σ_i φ_i(k_i)|` over the support.
    pub slackness_residual: f64,
    /// `min_j (c_j − Σ_i φ_i(k_i))`; non-negative up to round-off at optimality.
    pub min_reduced_cost: f64,
    pub iterations: usize,
}

/// Row-major strides for a tensor of the given shape.
pub fn strides(shape: &[usize]) -> Vec<usize> {
    let mut s = vec![1; shape.len()];
    for i in (0..shape.len().saturating_sub(1)).rev() {
        s[i] = s[i + 1] * shape[i + 1];
    }
    s
}

pub fn unflatten(mut flat: usize, shape: &[usize]) -> Vec<usize> {
    let mut idx = vec![0; shape.len()];
    for i in (0..shape.len()).rev() {
        idx[i] = flat % shape[i];
        flat /= shape[i];
    }
    idx
}

pub fn flatten(idx: &[usize], shape: &[usize]) -> usize {
    idx.iter().zip(shape).fold(0, |acc, (&k, &m)| acc * m + k)
}

/// Checked product of the axis lengths.
pub fn tensor_size(shape: &[usize]) -> Option<usize> {
    shape.iter().try_fold(1usize, |acc, &m| acc.checked_mul(m))
}

struct RowMap {
    offsets: Vec<usize>,
    rows: usize,
}

impl RowMap {
    fn new(shape: &[usize]) -> Self {
        let mut offsets = Vec::with_capacity(shape.len());
        let mut next = 0;
        for (i, &m) in shape.iter().enumerate() {
            offsets.push(next);
            next += if i == 0 { m } else { m - 1 };
        }
        Self {
            offsets,
            rows: next,
        }
    }

    fn row(&self, axis: usize, k: usize) -> Option<usize> {
        if axis == 0 {
            Some(k)
        } else if k == 0 {
            None
        } else {
            Some(self.offsets[axis] + k - 1)
        }
    }
}

struct Simplex<'a> {
    shape: &'a [usize],
    cost: &'a [f64],
    rows: RowMap,
    rhs: DVector<f64>,
    basis: Vec<usize>,
    binv: DMatrix<f64>,
    x: DVector<f64>,
    duals: DVector<f64>,
}

const PIVOT_TOL: f64 = 1e-9;
const REINVERT_EVERY: usize = 64;
const DEGENERATE_STREAK: usize = 32;

impl<'a> Simplex<'a> {
    fn column_rows(&self, flat: usize) -> Vec<usize> {
        let idx = unflatten(flat, self.shape);
        idx.iter()
            .enumerate()
            .filter_map(|(axis, &k)| self.rows.row(axis, k))
            .collect()
    }

    fn reinvert(&mut self) -> Result<()> {
        let r = self.rows.rows;
        let mut b = DMatrix::zeros(r, r);
        for (t, &j) in self.basis.iter().enumerate() {
            for row in self.column_rows(j) {
                b[(row, t)] = 1.0;
            }
        }
        self.binv = b
            .try_inverse()
            .ok_or_else(|| GwbError::Internal("simplex basis became singular".into()))?;
        self.x = &self.binv * &self.rhs;
        self.refresh_duals();
        Ok(())
    }

    fn refresh_duals(&mut self) {
        let cb = DVector::from_iterator(self.basis.len(), self.basis.iter().map(|&j| self.cost[j]));
        self.duals = self.binv.tr_mul(&cb);
    }

    fn axis_potentials(&self) -> Vec<Vec<f64>> {
        self.shape
            .iter()
            .enumerate()
            .map(|(axis, &m)| {
                (0..m)
                    .map(|k| self.rows.row(axis, k).map_or(0.0, |r| self.duals[r]))
                    .collect()
            })
            .collect()
    }

    /// Calls `visit(flat, reduced_cost)` on every column.
    fn price(&self, mut visit: impl FnMut(usize, f64)) {
        let pots = self.axis_potentials();
        let p = self.shape.len();
        let mut idx = vec![0usize; p];
        // partial[l] = Σ_{i<l} pots[i][idx[i]]
        let mut partial = vec![0.0; p + 1];
        for l in 0..p {
            partial[l + 1] = partial[l] + pots[l][0];
        }
        for (flat, &c) in self.cost.iter().enumerate() {
            visit(flat, c - partial[p]);
            let mut axis = p;
            while axis > 0 {
                axis -= 1;
                idx[axis] += 1;
                if idx[axis] < self.shape[axis] {
                    break;
                }
                idx[axis] = 0;
            }
            for l in axis..p {
                partial[l + 1] = partial[l] + pots[l][idx[l]];
            }
        }
    }
}

/// Multi-index north-west corner rule: one axis advances per step, giving
/// exactly `Σ mᵢ − p + 1` (possibly degenerate) basic tuples.
fn north_west_corner(shape: &[usize], marginals: &[&[f64]]) -> Vec<usize> {
    let p = shape.len();
    let mut idx = vec![0usize; p];
    let mut remaining: Vec<Vec<f64>> = marginals.iter().map(|m| m.to_vec()).collect();
    let mut basis = Vec::new();
    loop {
        basis.push(flatten(&idx, shape));
        let theta = (0..p)
            .map(|i| remaining[i][idx[i]])
            .fold(f64::INFINITY, f64::min)
            .max(0.0);
        for i in 0..p {
            remaining[i][idx[i]] -= theta;
        }
        let next = (0..p)
            .filter(|&i| idx[i] + 1 < shape[i])
            .min_by(|&a, &b| remaining[a][idx[a]].total_cmp(&remaining[b][idx[b]]));
        match next {
            Some(i) => idx[i] += 1,
            None => break,
        }
    }
    basis
}

/// Solves the multi-index transportation problem exactly.
///
/// `cost` is the dense cost tensor in row-major order over `shape`, and
/// `marginals[i]` has length `shape[i]`. All marginals must carry the same
/// total mass.
pub fn solve_transport(shape: &[usize], marginals: &[&[f64]], cost: &[f64]) -> Result<LpSolution> {
    if shape.is_empty() {
        return Err(GwbError::InvalidArgument("transport problem with no axes".into()));
    }
    if marginals.len() != shape.len() {
        return Err(GwbError::dim("number of marginals", shape.len(), marginals.len()));
    }
    for (i, (&m, a)) in shape.iter().zip(marginals).enumerate() {
        if m == 0 {
            return Err(GwbError::InvalidArgument(format!("axis {i} is empty")));
        }
        if a.len() != m {
            return Err(GwbError::dim(format!("marginal {i}"), m, a.len()));
        }
        if a.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(GwbError::InvalidWeights(format!("marginal {i} has a negative entry")));
        }
    }
    let n = tensor_size(shape).ok_or(GwbError::TensorCap {
        tuples: usize::MAX,
        cap: usize::MAX,
    })?;
    if cost.len() != n {
        return Err(GwbError::dim("cost tensor", n, cost.len()));
    }
    if cost.iter().any(|c| !c.is_finite()) {
        return Err(GwbError::InvalidArgument("cost tensor has non-finite entries".into()));
    }
    let total0: f64 = marginals[0].iter().sum();
    for (i, a) in marginals.iter().enumerate().skip(1) {
        let t: f64 = a.iter().sum();
        if (t - total0).abs() > 1e-9 * (1.0 + total0.abs()) {
            return Err(GwbError::InvalidWeights(format!(
                "marginal {i} has mass {t}, marginal 0 has {total0}"
            )));
        }
    }

    let rows = RowMap::new(shape);
    let mut rhs = DVector::zeros(rows.rows);
    for (axis, a) in marginals.iter().enumerate() {
        for (k, &v) in a.iter().enumerate() {
            if let Some(r) = rows.row(axis, k) {
                rhs[r] = v;
            }
        }
    }
    let basis = north_west_corner(shape, marginals);
    debug_assert_eq!(basis.len(), rows.rows);

    let r = rows.rows;
    let mut s = Simplex {
        shape,
        cost,
        rows,
        rhs,
        basis,
        binv: DMatrix::zeros(r, r),
        x: DVector::zeros(r),
        duals: DVector::zeros(r),
    };
    s.reinvert()?;

    let cmax = cost.iter().fold(0.0_f64, |a, c| a.max(c.abs()));
    let rc_tol = 1e-12 * (1.0 + cmax);
    let max_iter = 1000 + 50 * (r + n.min(1 << 20));
    let mut iterations = 0;
    let mut degenerate_streak = 0;
    let mut since_reinvert = 0;

    loop {
        let bland = degenerate_streak >= DEGENERATE_STREAK;
        let mut entering: Option<(usize, f64)> = None;
        s.price(|flat, rc| {
            if rc < -rc_tol {
                match entering {
                    None => entering = Some((flat, rc)),
                    Some((_, best)) if !bland && rc < best => entering = Some((flat, rc)),
                    _ => {}
                }
            }
        });

        let Some((enter, _)) = entering else {
            if since_reinvert == 0 {
                break;
            }
            // confirm optimality on a freshly factorized basis
            s.reinvert()?;
            since_reinvert = 0;
            continue;
        };

        iterations += 1;
        if iterations > max_iter {
            return Err(GwbError::Internal(format!(
                "transport simplex exceeded {max_iter} iterations"
            )));
        }

        let mut dir = DVector::zeros(r);
        for row in s.column_rows(enter) {
            dir += s.binv.column(row);
        }

        let mut leave: Option<(usize, f64)> = None;
        for l in 0..r {
            let dl = dir[l];
            if dl <= PIVOT_TOL {
                continue;
            }
            let ratio = s.x[l].max(0.0) / dl;
            leave = match leave {
                None => Some((l, ratio)),
                Some((best_l, best)) => {
                    let tie = (ratio - best).abs() <= 1e-15;
                    let better = if tie {
                        if bland {
                            s.basis[l] < s.basis[best_l]
                        } else {
                            dl > dir[best_l]
                        }
                    } else {
                        ratio < best
                    };
                    if better {
                        Some((l, ratio))
                    } else {
                        Some((best_l, best))
                    }
                }
            };
        }
        let Some((l, theta)) = leave else {
            return Err(GwbError::Internal(
                "transport simplex found an unbounded direction".into(),
            ));
        };

        if theta <= 1e-15 {
            degenerate_streak += 1;
        } else {
            degenerate_streak = 0;
        }

        s.x.axpy(-theta, &dir, 1.0);
        s.x[l] = theta;
        s.basis[l] = enter;

        let pivot = dir[l];
        for c in 0..r {
            let v = s.binv[(l, c)] / pivot;
            if v == 0.0 {
                continue;
            }
            let mut col = s.binv.column_mut(c);
            col.axpy(-v, &dir, 1.0);
            col[l] = v;
        }

        since_reinvert += 1;
        if since_reinvert >= REINVERT_EVERY {
            s.reinvert()?;
            since_reinvert = 0;
        } else {
            s.refresh_duals();
        }
    }

    let potentials = s.axis_potentials();
    let mut min_reduced_cost = f64::INFINITY;
    s.price(|_, rc| min_reduced_cost = min_reduced_cost.min(rc));

    let mut entries: Vec<(usize, f64)> = Vec::new();
    let mut slackness_residual = 0.0_f64;
    for (t, &j) in s.basis.iter().enumerate() {
        let mass = s.x[t];
        if mass > DEGENERATE_MASS {
            let idx = unflatten(j, shape);
            let pot: f64 = idx.iter().enumerate().map(|(i, &k)| potentials[i][k]).sum();
            slackness_residual = slackness_residual.max((cost[j] - pot).abs());
            entries.push((j, mass));
        }
    }
    entries.sort_by_key(|e| e.0);
    let objective = entries.iter().map(|&(j, m)| cost[j] * m).sum();

    Ok(LpSolution {
        entries,
        objective,
        potentials,
        slackness_residual,
        min_reduced_cost,
        iterations,
    })
}
