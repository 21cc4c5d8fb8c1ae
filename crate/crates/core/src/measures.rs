//! Measure types, linear pushforwards and the objective
//! `F(γ) = Σ λᵢ W₂²(νᵢ, Pᵢ#γ)`.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};

use crate::error::{GwbError, Result};
use crate::linalg::{self, ProjectionFamily, Reformulation, WEIGHT_SUM_TOL};
use crate::{gmm, ot};

/// Weighted point cloud; atoms are the rows of `points`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMeasure {
    points: DMatrix<f64>,
    weights: DVector<f64>,
}

impl DiscreteMeasure {
    /// Zero-weight atoms are dropped; the remaining weights must sum to one.
    pub fn new(points: DMatrix<f64>, weights: DVector<f64>) -> Result<Self> {
        if points.nrows() != weights.len() {
            return Err(GwbError::dim("number of weights", points.nrows(), weights.len()));
        }
        if points.ncols() == 0 {
            return Err(GwbError::InvalidArgument("atoms have dimension 0".into()));
        }
        if points.iter().any(|v| !v.is_finite()) {
            return Err(GwbError::InvalidArgument("non-finite atom coordinate".into()));
        }
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
            return Err(GwbError::InvalidWeights(format!("atom weight {w} is negative")));
        }
        let keep: Vec<usize> = (0..weights.len()).filter(|&k| weights[k] > 0.0).collect();
        if keep.is_empty() {
            return Err(GwbError::InvalidWeights("measure has no atom with positive mass".into()));
        }
        let total: f64 = keep.iter().map(|&k| weights[k]).sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(GwbError::InvalidWeights(format!(
                "atom weights sum to {total}, expected 1"
            )));
        }
        if keep.len() == weights.len() {
            return Ok(Self { points, weights });
        }
        Ok(Self {
            points: points.select_rows(keep.iter()),
            weights: DVector::from_iterator(keep.len(), keep.iter().map(|&k| weights[k])),
        })
    }

    /// Divides the weights by their sum before validating.
    pub fn normalized(points: DMatrix<f64>, weights: DVector<f64>) -> Result<Self> {
        let total = weights.sum();
        if !(total.is_finite() && total > 0.0) {
            return Err(GwbError::InvalidWeights(format!("atom weights sum to {total}")));
        }
        Self::new(points, weights / total)
    }

    pub fn uniform(points: DMatrix<f64>) -> Result<Self> {
        let m = points.nrows();
        if m == 0 {
            return Err(GwbError::InvalidWeights("measure has no atoms".into()));
        }
        Self::new(points, DVector::from_element(m, 1.0 / m as f64))
    }

    pub fn dirac(point: &DVector<f64>) -> Result<Self> {
        Self::new(DMatrix::from_row_slice(1, point.len(), point.as_slice()), DVector::from_element(1, 1.0))
    }

    pub fn from_rows(rows: &[Vec<f64>], weights: &[f64]) -> Result<Self> {
        let n = rows.first().map_or(0, |r| r.len());
        if let Some(bad) = rows.iter().find(|r| r.len() != n) {
            return Err(GwbError::dim("atom coordinates", n, bad.len()));
        }
        let points = DMatrix::from_fn(rows.len(), n, |i, j| rows[i][j]);
        Self::new(points, DVector::from_column_slice(weights))
    }

    pub fn len(&self) -> usize {
        self.points.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.points.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.points.ncols()
    }

    pub fn points(&self) -> &DMatrix<f64> {
        &self.points
    }

    pub fn weights(&self) -> &DVector<f64> {
        &self.weights
    }

    pub fn point(&self, k: usize) -> DVector<f64> {
        self.points.row(k).transpose()
    }

    pub fn mean(&self) -> DVector<f64> {
        self.points.tr_mul(&self.weights)
    }

    /// `E[x xᵀ]`.
    pub fn second_moment(&self) -> DMatrix<f64> {
        let mut weighted = self.points.clone();
        for (k, w) in self.weights.iter().enumerate() {
            weighted.row_mut(k).scale_mut(*w);
        }
        linalg::symmetrize(&(self.points.transpose() * weighted))
    }

    /// `T#μ` for a `k × n` matrix `T`; atoms with bitwise-equal images are merged.
    pub fn pushforward(&self, t: &DMatrix<f64>) -> Result<DiscreteMeasure> {
        if t.ncols() != self.dim() {
            return Err(GwbError::dim("pushforward map columns", self.dim(), t.ncols()));
        }
        let mapped = &self.points * t.transpose();
        Ok(merge_atoms(&mapped, self.weights.as_slice()))
    }

    pub fn translate(&self, shift: &DVector<f64>) -> Result<DiscreteMeasure> {
        if shift.len() != self.dim() {
            return Err(GwbError::dim("translation", self.dim(), shift.len()));
        }
        let mut points = self.points.clone();
        for mut row in points.row_iter_mut() {
            row += shift.transpose();
        }
        Ok(Self {
            points,
            weights: self.weights.clone(),
        })
    }
}

/// Builds a measure from possibly repeated rows, summing the weights of rows
/// whose coordinates are bitwise equal (after folding `-0.0` into `0.0`).
/// Rows keep their order of first appearance. Weights must already sum to one.
pub(crate) fn merge_atoms(points: &DMatrix<f64>, weights: &[f64]) -> DiscreteMeasure {
    let n = points.ncols();
    let mut slot: HashMap<Vec<u64>, usize> = HashMap::with_capacity(points.nrows());
    let mut rows: Vec<usize> = Vec::new();
    let mut merged: Vec<f64> = Vec::new();
    for (k, &w) in weights.iter().enumerate() {
        if w <= 0.0 {
            continue;
        }
        let key: Vec<u64> = (0..n).map(|j| (points[(k, j)] + 0.0).to_bits()).collect();
        match slot.get(&key) {
            Some(&s) => merged[s] += w,
            None => {
                slot.insert(key, rows.len());
                rows.push(k);
                merged.push(w);
            }
        }
    }
    DiscreteMeasure {
        points: points.select_rows(rows.iter()),
        weights: DVector::from_vec(merged),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMeasure {
    mean: DVector<f64>,
    cov: DMatrix<f64>,
}

impl GaussianMeasure {
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        if cov.nrows() != mean.len() || cov.ncols() != mean.len() {
            return Err(GwbError::dim("covariance size", mean.len(), cov.nrows()));
        }
        if mean.iter().chain(cov.iter()).any(|v| !v.is_finite()) {
            return Err(GwbError::InvalidArgument("non-finite Gaussian parameter".into()));
        }
        // validates symmetry and the eigenvalue floor
        linalg::psd_sqrt(&cov)?;
        Ok(Self {
            mean,
            cov: linalg::symmetrize(&cov),
        })
    }

    pub fn centered(cov: DMatrix<f64>) -> Result<Self> {
        Self::new(DVector::zeros(cov.nrows()), cov)
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    pub fn second_moment(&self) -> DMatrix<f64> {
        &self.cov + &self.mean * self.mean.transpose()
    }

    pub fn pushforward(&self, t: &DMatrix<f64>) -> Result<GaussianMeasure> {
        if t.ncols() != self.dim() {
            return Err(GwbError::dim("pushforward map columns", self.dim(), t.ncols()));
        }
        Ok(Self {
            mean: t * &self.mean,
            cov: linalg::symmetrize(&(t * &self.cov * t.transpose())),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMixture {
    components: Vec<GaussianMeasure>,
    weights: Vec<f64>,
}

impl GaussianMixture {
    pub fn new(components: Vec<GaussianMeasure>, weights: Vec<f64>) -> Result<Self> {
        if components.is_empty() {
            return Err(GwbError::InvalidArgument("mixture has no component".into()));
        }
        if components.len() != weights.len() {
            return Err(GwbError::dim("mixture weights", components.len(), weights.len()));
        }
        let dim = components[0].dim();
        if let Some(c) = components.iter().find(|c| c.dim() != dim) {
            return Err(GwbError::dim("mixture component", dim, c.dim()));
        }
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
            return Err(GwbError::InvalidWeights(format!("component weight {w} is not positive")));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(GwbError::InvalidWeights(format!(
                "component weights sum to {total}, expected 1"
            )));
        }
        Ok(Self {
            components,
            weights,
        })
    }

    pub fn single(component: GaussianMeasure) -> Self {
        Self {
            components: vec![component],
            weights: vec![1.0],
        }
    }

    pub fn dim(&self) -> usize {
        self.components[0].dim()
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn components(&self) -> &[GaussianMeasure] {
        &self.components
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn mean(&self) -> DVector<f64> {
        self.components
            .iter()
            .zip(&self.weights)
            .fold(DVector::zeros(self.dim()), |acc, (c, w)| acc + c.mean() * *w)
    }

    pub fn second_moment(&self) -> DMatrix<f64> {
        self.components
            .iter()
            .zip(&self.weights)
            .fold(DMatrix::zeros(self.dim(), self.dim()), |acc, (c, w)| {
                acc + c.second_moment() * *w
            })
    }

    pub fn pushforward(&self, t: &DMatrix<f64>) -> Result<GaussianMixture> {
        let components = self
            .components
            .iter()
            .map(|c| c.pushforward(t))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            components,
            weights: self.weights.clone(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeasureKind {
    Discrete,
    Gaussian,
    Mixture,
}

impl std::fmt::Display for MeasureKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            MeasureKind::Discrete => "discrete",
            MeasureKind::Gaussian => "gaussian",
            MeasureKind::Mixture => "gmm",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Measure {
    Discrete(DiscreteMeasure),
    Gaussian(GaussianMeasure),
    Mixture(GaussianMixture),
}

impl Measure {
    pub fn kind(&self) -> MeasureKind {
        match self {
            Measure::Discrete(_) => MeasureKind::Discrete,
            Measure::Gaussian(_) => MeasureKind::Gaussian,
            Measure::Mixture(_) => MeasureKind::Mixture,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Measure::Discrete(m) => m.dim(),
            Measure::Gaussian(m) => m.dim(),
            Measure::Mixture(m) => m.dim(),
        }
    }

    pub fn mean(&self) -> DVector<f64> {
        match self {
            Measure::Discrete(m) => m.mean(),
            Measure::Gaussian(m) => m.mean().clone(),
            Measure::Mixture(m) => m.mean(),
        }
    }

    pub fn second_moment(&self) -> DMatrix<f64> {
        match self {
            Measure::Discrete(m) => m.second_moment(),
            Measure::Gaussian(m) => m.second_moment(),
            Measure::Mixture(m) => m.second_moment(),
        }
    }

    pub fn pushforward(&self, t: &DMatrix<f64>) -> Result<Measure> {
        Ok(match self {
            Measure::Discrete(m) => Measure::Discrete(m.pushforward(t)?),
            Measure::Gaussian(m) => Measure::Gaussian(m.pushforward(t)?),
            Measure::Mixture(m) => Measure::Mixture(m.pushforward(t)?),
        })
    }

    /// Squared distance with the backend matching both kinds: exact LP for
    /// discrete pairs, closed form for Gaussians, MW₂ for mixtures.
    pub fn w2_squared(&self, other: &Measure) -> Result<f64> {
        match (self, other) {
            (Measure::Discrete(a), Measure::Discrete(b)) => Ok(ot::w2_discrete_exact(a, b)?.plan.cost),
            (Measure::Gaussian(a), Measure::Gaussian(b)) => ot::w2_gaussian(a, b),
            (Measure::Mixture(a), Measure::Mixture(b)) => Ok(gmm::mw2(a, b)?.cost),
            (a, b) => Err(GwbError::MixedMarginals(format!("{} vs {}", a.kind(), b.kind()))),
        }
    }
}

/// A full instance: the maps, their weights and one marginal per map.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    family: ProjectionFamily,
    marginals: Vec<Measure>,
}

impl ProblemSpec {
    pub fn new(family: ProjectionFamily, marginals: Vec<Measure>) -> Result<Self> {
        if marginals.len() != family.len() {
            return Err(GwbError::dim("number of marginals", family.len(), marginals.len()));
        }
        for (i, m) in marginals.iter().enumerate() {
            if m.dim() != family.target_dim(i) {
                return Err(GwbError::dim(
                    format!("marginal {i}"),
                    family.target_dim(i),
                    m.dim(),
                ));
            }
        }
        let kind = marginals[0].kind();
        if let Some(other) = marginals.iter().find(|m| m.kind() != kind) {
            return Err(GwbError::MixedMarginals(format!("{kind} and {}", other.kind())));
        }
        Ok(Self { family, marginals })
    }

    pub fn family(&self) -> &ProjectionFamily {
        &self.family
    }

    pub fn marginals(&self) -> &[Measure] {
        &self.marginals
    }

    pub fn kind(&self) -> MeasureKind {
        self.marginals[0].kind()
    }

    pub fn discrete_marginals(&self) -> Result<Vec<&DiscreteMeasure>> {
        self.marginals
            .iter()
            .map(|m| match m {
                Measure::Discrete(d) => Ok(d),
                other => Err(GwbError::MixedMarginals(format!(
                    "route needs discrete marginals, found {}",
                    other.kind()
                ))),
            })
            .collect()
    }

    pub fn gaussian_marginals(&self) -> Result<Vec<&GaussianMeasure>> {
        self.marginals
            .iter()
            .map(|m| match m {
                Measure::Gaussian(g) => Ok(g),
                other => Err(GwbError::MixedMarginals(format!(
                    "route needs Gaussian marginals, found {}",
                    other.kind()
                ))),
            })
            .collect()
    }

    pub fn mixture_marginals(&self) -> Result<Vec<&GaussianMixture>> {
        self.marginals
            .iter()
            .map(|m| match m {
                Measure::Mixture(g) => Ok(g),
                other => Err(GwbError::MixedMarginals(format!(
                    "route needs mixture marginals, found {}",
                    other.kind()
                ))),
            })
            .collect()
    }

    pub fn second_moments(&self) -> Vec<DMatrix<f64>> {
        self.marginals.iter().map(Measure::second_moment).collect()
    }
}

/// Value of `F` with its per-marginal terms `W₂²(νᵢ, Pᵢ#γ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Objective {
    pub total: f64,
    pub terms: Vec<f64>,
}

pub fn objective_f(gamma: &Measure, spec: &ProblemSpec) -> Result<Objective> {
    let family = spec.family();
    if gamma.dim() != family.dim() {
        return Err(GwbError::dim("candidate measure", family.dim(), gamma.dim()));
    }
    if gamma.kind() != spec.kind() {
        return Err(GwbError::MixedMarginals(format!(
            "candidate is {}, marginals are {}",
            gamma.kind(),
            spec.kind()
        )));
    }
    let mut terms = Vec::with_capacity(family.len());
    for (i, nu) in spec.marginals().iter().enumerate() {
        let projected = gamma.pushforward(family.map(i))?;
        terms.push(nu.w2_squared(&projected)?);
    }
    let total = terms
        .iter()
        .zip(family.weights())
        .map(|(t, w)| t * w)
        .sum();
    Ok(Objective { total, terms })
}

/// `A⁻¹ Σ λᵢ Pᵢᵀ mᵢ`, the mean of every barycenter.
pub fn barycenter_mean(family: &ProjectionFamily, means: &[DVector<f64>]) -> Result<DVector<f64>> {
    Reformulation::new(family)?.b_gen(means)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::{dmatrix, dvector};

    fn two_axes() -> ProjectionFamily {
        ProjectionFamily::new(2, vec![dmatrix![1.0, 0.0], dmatrix![0.0, 1.0]], vec![0.5, 0.5])
            .unwrap()
    }

    fn three_axes() -> ProjectionFamily {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        ProjectionFamily::new(
            2,
            vec![dmatrix![1.0, 0.0], dmatrix![0.0, 1.0], dmatrix![s, s]],
            vec![1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0],
        )
        .unwrap()
    }

    fn std_normal_1d() -> Measure {
        Measure::Gaussian(GaussianMeasure::centered(dmatrix![1.0]).unwrap())
    }

    #[test]
    fn zero_weights_are_dropped() {
        let m = DiscreteMeasure::new(dmatrix![0.0; 1.0; 2.0], dvector![0.5, 0.0, 0.5]).unwrap();
        assert_eq!(m.len(), 2);
        assert_eq!(m.points(), &dmatrix![0.0; 2.0]);
        assert!(DiscreteMeasure::new(dmatrix![0.0; 1.0], dvector![0.5, 0.6]).is_err());
        assert!(DiscreteMeasure::new(dmatrix![0.0; 1.0], dvector![1.5, -0.5]).is_err());
    }

    #[test]
    fn pushforward_of_dirac() {
        let m = DiscreteMeasure::dirac(&dvector![1.0, 2.0]).unwrap();
        let p = m.pushforward(&dmatrix![1.0, 0.0]).unwrap();
        assert_eq!(p.points(), &dmatrix![1.0]);
        assert_eq!(p.weights(), &dvector![1.0]);
    }

    #[test]
    fn pushforward_merges_coincident_images() {
        let m = DiscreteMeasure::uniform(dmatrix![0.0, 0.0; 0.0, 1.0]).unwrap();
        let p = m.pushforward(&dmatrix![1.0, 0.0]).unwrap();
        assert_eq!(p.len(), 1);
        assert_eq!(p.points(), &dmatrix![0.0]);
        assert_eq!(p.weights(), &dvector![1.0]);
    }

    #[test]
    fn pushforward_folds_negative_zero() {
        let m = DiscreteMeasure::uniform(dmatrix![-0.0; 0.0]).unwrap();
        let p = m.pushforward(&dmatrix![1.0]).unwrap();
        assert_eq!(p.len(), 1);
    }

    #[test]
    fn rotation_preserves_geometry() {
        let m = DiscreteMeasure::new(
            dmatrix![0.0, 0.0; 1.0, 2.0; -3.0, 0.5],
            dvector![0.2, 0.3, 0.5],
        )
        .unwrap();
        let (c, s) = (0.3f64.cos(), 0.3f64.sin());
        let rot = dmatrix![c, -s; s, c];
        let r = m.pushforward(&rot).unwrap();
        assert_eq!(r.weights(), m.weights());
        for a in 0..3 {
            for b in 0..3 {
                assert_relative_eq!(
                    (r.point(a) - r.point(b)).norm(),
                    (m.point(a) - m.point(b)).norm(),
                    epsilon = 1e-12
                );
            }
        }
    }

    #[test]
    fn pushforward_dimension_error() {
        let m = DiscreteMeasure::dirac(&dvector![1.0, 2.0]).unwrap();
        assert!(matches!(m.pushforward(&dmatrix![1.0]), Err(GwbError::Dimension { .. })));
        let g = GaussianMeasure::centered(DMatrix::identity(2, 2)).unwrap();
        assert!(matches!(g.pushforward(&dmatrix![1.0]), Err(GwbError::Dimension { .. })));
    }

    #[test]
    fn gaussian_pushforward_cases() {
        let g = GaussianMeasure::centered(DMatrix::identity(2, 2)).unwrap();
        let p = g.pushforward(&dmatrix![1.0, 0.0]).unwrap();
        assert_eq!(p.mean(), &dvector![0.0]);
        assert_eq!(p.cov(), &dmatrix![1.0]);

        let g = GaussianMeasure::new(dvector![0.5, 0.5], dmatrix![0.06, 0.05; 0.05, 0.05]).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let p = g.pushforward(&dmatrix![s, s]).unwrap();
        assert_relative_eq!(p.mean()[0], s, epsilon = 1e-15);
        assert_relative_eq!(p.cov()[(0, 0)], 0.105, epsilon = 1e-15);
    }

    #[test]
    fn gaussian_rejects_invalid_covariance() {
        assert!(GaussianMeasure::centered(dmatrix![1.0, 0.5; 0.4, 1.0]).is_err());
        assert!(GaussianMeasure::centered(dmatrix![1.0, 2.0; 2.0, 1.0]).is_err());
    }

    #[test]
    fn objective_vanishes_on_exact_projections() {
        let gamma = DiscreteMeasure::new(
            dmatrix![0.0, 1.0; 2.0, -1.0; 0.5, 0.5],
            dvector![0.25, 0.25, 0.5],
        )
        .unwrap();
        let f = three_axes();
        let marginals = f
            .maps()
            .iter()
            .map(|p| Measure::Discrete(gamma.pushforward(p).unwrap()))
            .collect();
        let spec = ProblemSpec::new(f, marginals).unwrap();
        let obj = objective_f(&Measure::Discrete(gamma), &spec).unwrap();
        assert_relative_eq!(obj.total, 0.0, epsilon = 1e-14);
    }

    #[test]
    fn objective_on_degenerate_gaussian() {
        let spec = ProblemSpec::new(two_axes(), vec![std_normal_1d(), std_normal_1d()]).unwrap();
        let gamma = Measure::Gaussian(GaussianMeasure::centered(dmatrix![1.0, 0.0; 0.0, 0.0]).unwrap());
        let obj = objective_f(&gamma, &spec).unwrap();
        assert_relative_eq!(obj.total, 0.5, epsilon = 1e-14);
        assert_relative_eq!(obj.terms[1], 1.0, epsilon = 1e-14);
    }

    #[test]
    fn objective_zero_on_whole_family_of_solutions() {
        let spec = ProblemSpec::new(two_axes(), vec![std_normal_1d(), std_normal_1d()]).unwrap();
        for alpha in [-0.9, -0.3, 0.0, 0.7] {
            let s = dmatrix![1.0, alpha; alpha, 1.0];
            let gamma = Measure::Gaussian(GaussianMeasure::centered(s).unwrap());
            assert!(objective_f(&gamma, &spec).unwrap().total.abs() < 1e-12);
        }
    }

    #[test]
    fn mixed_marginals_rejected() {
        let disc = Measure::Discrete(DiscreteMeasure::dirac(&dvector![0.0]).unwrap());
        assert!(matches!(
            ProblemSpec::new(two_axes(), vec![disc, std_normal_1d()]),
            Err(GwbError::MixedMarginals(_))
        ));
    }

    #[test]
    fn barycenter_mean_cases() {
        let f = two_axes();
        assert_eq!(
            barycenter_mean(&f, &[dvector![0.0], dvector![0.0]]).unwrap(),
            dvector![0.0, 0.0]
        );
        let id = ProjectionFamily::new(2, vec![DMatrix::identity(2, 2)], vec![1.0]).unwrap();
        assert_relative_eq!(
            barycenter_mean(&id, &[dvector![0.3, -2.0]]).unwrap(),
            dvector![0.3, -2.0],
            epsilon = 1e-14
        );
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let m = barycenter_mean(&three_axes(), &[dvector![0.5], dvector![0.5], dvector![s]]).unwrap();
        assert_relative_eq!(m, dvector![0.5, 0.5], epsilon = 1e-14);
    }

    #[test]
    fn mixture_moments() {
        let a = GaussianMeasure::new(dvector![1.0], dmatrix![0.5]).unwrap();
        let b = GaussianMeasure::new(dvector![-1.0], dmatrix![0.25]).unwrap();
        let g = GaussianMixture::new(vec![a, b], vec![0.25, 0.75]).unwrap();
        assert_relative_eq!(g.mean()[0], -0.5, epsilon = 1e-15);
        assert_relative_eq!(g.second_moment()[(0, 0)], 0.25 * 1.5 + 0.75 * 1.25, epsilon = 1e-15);
        assert!(GaussianMixture::new(vec![], vec![]).is_err());
    }
}
