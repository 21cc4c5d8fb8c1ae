//! Entropic transport over a dense cost tensor with `p ≥ 2` marginals.
//!
//! Each sweep rescales the marginals round-robin `0..p`, so after the update of
//! axis `i` the plan has the exact i-th marginal. Small problems with a modest
//! `max C / ε` use multiplicative scalings; otherwise, or as soon as a scaling
//! underflows, the iteration runs on log-potentials with log-sum-exp
//! reductions.

use crate::error::{GwbError, Result};
use crate::lp::tensor_size;

/// Above this `max C / ε` the solver starts directly in the log domain.
pub const LOG_DOMAIN_RATIO: f64 = 500.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SinkhornOptions {
    pub epsilon: f64,
    pub max_iter: usize,
    /// Stop once the L1 marginal violation of every axis is below `tol`.
    pub tol: f64,
}

impl Default for SinkhornOptions {
    fn default() -> Self {
        Self {
            epsilon: 1e-2,
            max_iter: 10_000,
            tol: 1e-9,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SinkhornOutcome {
    /// Dense plan in the row-major layout of the cost tensor.
    pub plan: Vec<f64>,
    /// `⟨C, π⟩`, the unregularized cost.
    pub transport_cost: f64,
    /// `⟨C, π⟩ + ε KL(π ‖ ⊗ aᵢ)`.
    pub regularized_cost: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Largest L1 marginal violation over the axes.
    pub marginal_error: f64,
    pub log_domain: bool,
}

struct Problem<'a> {
    shape: &'a [usize],
    marginals: &'a [&'a [f64]],
    cost: &'a [f64],
    eps: f64,
}

impl Problem<'_> {
    /// Visits every tensor entry with its multi-index.
    fn for_each(&self, mut visit: impl FnMut(usize, &[usize])) {
        let p = self.shape.len();
        let mut idx = vec![0usize; p];
        for flat in 0..self.cost.len() {
            visit(flat, &idx);
            let mut axis = p;
            while axis > 0 {
                axis -= 1;
                idx[axis] += 1;
                if idx[axis] < self.shape[axis] {
                    break;
                }
                idx[axis] = 0;
            }
        }
    }

    fn marginal_error(&self, plan: &[f64]) -> f64 {
        let mut sums: Vec<Vec<f64>> = self.shape.iter().map(|&m| vec![0.0; m]).collect();
        self.for_each(|flat, idx| {
            for (axis, &k) in idx.iter().enumerate() {
                sums[axis][k] += plan[flat];
            }
        });
        sums.iter()
            .zip(self.marginals)
            .map(|(s, a)| s.iter().zip(a.iter()).map(|(x, y)| (x - y).abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    fn finish(&self, plan: Vec<f64>, converged: bool, iterations: usize, log_domain: bool) -> SinkhornOutcome {
        let marginal_error = self.marginal_error(&plan);
        let mut transport_cost = 0.0;
        let mut kl = 0.0;
        self.for_each(|flat, idx| {
            let m = plan[flat];
            if m > 0.0 {
                transport_cost += m * self.cost[flat];
                let reference: f64 = idx
                    .iter()
                    .enumerate()
                    .map(|(axis, &k)| self.marginals[axis][k].ln())
                    .sum();
                kl += m * (m.ln() - reference) - m;
            }
        });
        kl += 1.0;
        SinkhornOutcome {
            plan,
            transport_cost,
            regularized_cost: transport_cost + self.eps * kl,
            converged,
            iterations,
            marginal_error,
            log_domain,
        }
    }

    /// Multiplicative scalings. Returns `None` when a scaling stops being a
    /// positive finite number.
    fn run_scaling(&self, opts: &SinkhornOptions) -> Option<SinkhornOutcome> {
        let p = self.shape.len();
        let kernel: Vec<f64> = self.cost.iter().map(|c| (-c / self.eps).exp()).collect();
        if kernel.contains(&0.0) {
            return None;
        }
        let mut scal: Vec<Vec<f64>> = self.shape.iter().map(|&m| vec![1.0; m]).collect();
        let plan_of = |scal: &Vec<Vec<f64>>| {
            let mut plan = vec![0.0; kernel.len()];
            self.for_each(|flat, idx| {
                let mut v = kernel[flat];
                for (axis, &k) in idx.iter().enumerate() {
                    v *= scal[axis][k];
                }
                plan[flat] = v;
            });
            plan
        };
        let mut best: Option<(f64, Vec<Vec<f64>>)> = None;
        for iter in 1..=opts.max_iter {
            for axis in 0..p {
                let mut denom = vec![0.0; self.shape[axis]];
                self.for_each(|flat, idx| {
                    let mut v = kernel[flat];
                    for (other, &k) in idx.iter().enumerate() {
                        if other != axis {
                            v *= scal[other][k];
                        }
                    }
                    denom[idx[axis]] += v;
                });
                for k in 0..self.shape[axis] {
                    let s = self.marginals[axis][k] / denom[k];
                    if !(s.is_finite() && s > 0.0) {
                        return None;
                    }
                    scal[axis][k] = s;
                }
            }
            let err = self.marginal_error(&plan_of(&scal));
            if err <= opts.tol {
                return Some(self.finish(plan_of(&scal), true, iter, false));
            }
            if best.as_ref().is_none_or(|(e, _)| err < *e) {
                best = Some((err, scal.clone()));
            }
        }
        let (_, scal) = best?;
        Some(self.finish(plan_of(&scal), false, opts.max_iter, false))
    }

    fn log_plan(&self, pots: &[Vec<f64>]) -> Vec<f64> {
        let mut plan = vec![0.0; self.cost.len()];
        self.for_each(|flat, idx| {
            let s: f64 = idx.iter().enumerate().map(|(axis, &k)| pots[axis][k]).sum();
            plan[flat] = ((s - self.cost[flat]) / self.eps).exp();
        });
        plan
    }

    fn run_log(&self, opts: &SinkhornOptions) -> SinkhornOutcome {
        let p = self.shape.len();
        let mut pots: Vec<Vec<f64>> = self.shape.iter().map(|&m| vec![0.0; m]).collect();
        let log_a: Vec<Vec<f64>> = self
            .marginals
            .iter()
            .map(|a| a.iter().map(|v| v.ln()).collect())
            .collect();
        let mut exponent = vec![0.0; self.cost.len()];
        let mut best: Option<(f64, Vec<Vec<f64>>)> = None;
        for iter in 1..=opts.max_iter {
            for axis in 0..p {
                let m = self.shape[axis];
                let mut maxes = vec![f64::NEG_INFINITY; m];
                self.for_each(|flat, idx| {
                    let s: f64 = idx
                        .iter()
                        .enumerate()
                        .filter(|(other, _)| *other != axis)
                        .map(|(other, &k)| pots[other][k])
                        .sum();
                    let e = (s - self.cost[flat]) / self.eps;
                    exponent[flat] = e;
                    let k = idx[axis];
                    if e > maxes[k] {
                        maxes[k] = e;
                    }
                });
                let mut sums = vec![0.0; m];
                self.for_each(|flat, idx| {
                    let k = idx[axis];
                    sums[k] += (exponent[flat] - maxes[k]).exp();
                });
                for k in 0..m {
                    let lse = maxes[k] + sums[k].ln();
                    pots[axis][k] = self.eps * (log_a[axis][k] - lse);
                }
            }
            let err = self.marginal_error(&self.log_plan(&pots));
            if err <= opts.tol {
                return self.finish(self.log_plan(&pots), true, iter, true);
            }
            if best.as_ref().is_none_or(|(e, _)| err < *e) {
                best = Some((err, pots.clone()));
            }
        }
        let pots = best.map(|(_, p)| p).unwrap_or(pots);
        self.finish(self.log_plan(&pots), false, opts.max_iter, true)
    }
}

/// Entropic multi-marginal transport. `cost` is row-major over `shape`.
pub fn sinkhorn_tensor(
    shape: &[usize],
    marginals: &[&[f64]],
    cost: &[f64],
    opts: &SinkhornOptions,
) -> Result<SinkhornOutcome> {
    if !(opts.epsilon.is_finite() && opts.epsilon > 0.0) {
        return Err(GwbError::InvalidArgument(format!(
            "entropic regularization must be positive, got {}",
            opts.epsilon
        )));
    }
    if shape.len() < 2 || marginals.len() != shape.len() {
        return Err(GwbError::InvalidArgument(
            "entropic transport needs at least two marginals".into(),
        ));
    }
    let n = tensor_size(shape).ok_or(GwbError::TensorCap {
        tuples: usize::MAX,
        cap: usize::MAX,
    })?;
    if cost.len() != n {
        return Err(GwbError::dim("cost tensor", n, cost.len()));
    }
    for (i, (a, &m)) in marginals.iter().zip(shape).enumerate() {
        if a.len() != m {
            return Err(GwbError::dim(format!("marginal {i}"), m, a.len()));
        }
        if a.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(GwbError::InvalidWeights(format!(
                "marginal {i} needs positive entries"
            )));
        }
    }
    let problem = Problem {
        shape,
        marginals,
        cost,
        eps: opts.epsilon,
    };
    let cmax = cost.iter().fold(0.0_f64, |a, c| a.max(c.abs()));
    if cmax / opts.epsilon <= LOG_DOMAIN_RATIO {
        if let Some(out) = problem.run_scaling(opts) {
            return Ok(out);
        }
    }
    Ok(problem.run_log(opts))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn zero_cost_gives_product_coupling() {
        let a = [0.2, 0.8];
        let b = [0.5, 0.25, 0.25];
        let out = sinkhorn_tensor(&[2, 3], &[&a, &b], &[0.0; 6], &SinkhornOptions::default()).unwrap();
        assert!(out.converged);
        for (i, ai) in a.iter().enumerate() {
            for (j, bj) in b.iter().enumerate() {
                assert_relative_eq!(out.plan[i * 3 + j], ai * bj, epsilon = 1e-12);
            }
        }
        assert_relative_eq!(out.regularized_cost, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn log_and_scaling_domains_agree() {
        let a = [0.3, 0.7];
        let b = [0.6, 0.4];
        let c = [0.0, 1.0, 2.0, 0.5];
        let opts = SinkhornOptions {
            epsilon: 0.1,
            max_iter: 5000,
            tol: 1e-12,
        };
        let scaled = sinkhorn_tensor(&[2, 2], &[&a, &b], &c, &opts).unwrap();
        assert!(!scaled.log_domain);
        let problem = Problem {
            shape: &[2, 2],
            marginals: &[&a, &b],
            cost: &c,
            eps: 0.1,
        };
        let logged = problem.run_log(&opts);
        for (x, y) in scaled.plan.iter().zip(&logged.plan) {
            assert_relative_eq!(x, y, epsilon = 1e-10);
        }
    }

    #[test]
    fn tiny_epsilon_uses_log_domain() {
        let a = [0.5, 0.5];
        let c = [0.0, 1.0, 1.0, 0.0];
        let opts = SinkhornOptions {
            epsilon: 1e-4,
            max_iter: 1000,
            tol: 1e-10,
        };
        let out = sinkhorn_tensor(&[2, 2], &[&a, &a], &c, &opts).unwrap();
        assert!(out.log_domain);
        assert!(out.converged);
        assert!(out.transport_cost < 1e-12);
    }

    #[test]
    fn three_marginals_match_constraints() {
        let shape = [2, 3, 2];
        let a: [&[f64]; 3] = [&[0.5, 0.5], &[0.2, 0.3, 0.5], &[0.9, 0.1]];
        let cost: Vec<f64> = (0..12).map(|j| (j as f64 * 0.7).sin().abs()).collect();
        let opts = SinkhornOptions {
            epsilon: 0.05,
            max_iter: 20_000,
            tol: 1e-11,
        };
        let out = sinkhorn_tensor(&shape, &a, &cost, &opts).unwrap();
        assert!(out.converged);
        assert!(out.marginal_error <= 1e-11);
    }

    #[test]
    fn non_convergence_is_flagged() {
        let a = [0.5, 0.5];
        let b = [0.1, 0.9];
        let c = [0.0, 1.0, 1.0, 0.0];
        let opts = SinkhornOptions {
            epsilon: 1e-3,
            max_iter: 1,
            tol: 1e-15,
        };
        let out = sinkhorn_tensor(&[2, 2], &[&a, &b], &c, &opts).unwrap();
        assert!(!out.converged);
        assert_eq!(out.iterations, 1);
    }

    #[test]
    fn rejects_bad_epsilon() {
        let a = [1.0];
        assert!(sinkhorn_tensor(
            &[1, 1],
            &[&a, &a],
            &[0.0],
            &SinkhornOptions {
                epsilon: 0.0,
                ..Default::default()
            }
        )
        .is_err());
    }
}
