//! Matrix utilities behind the reformulation of the generalized barycenter
//! problem: the family of linear maps, the matrix `A = Σ λᵢ PᵢᵀPᵢ`, PSD
//! square roots, reduction to the orthogonal complement of the common kernel,
//! and the maps `A^{-1/2} Pᵢᵀ` that send each marginal into `R^d`.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};

use crate::error::{GwbError, Result};

/// Relative singular-value / eigenvalue cutoff used for every rank decision.
pub const RANK_TOL: f64 = 1e-10;
/// Tolerated asymmetry and negative round-off on PSD inputs.
pub const PSD_TOL: f64 = 1e-10;
/// Tolerance on `Σ λᵢ = 1`.
pub const WEIGHT_SUM_TOL: f64 = 1e-12;

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Largest absolute entry of `m - mᵀ`.
pub fn asymmetry(m: &DMatrix<f64>) -> f64 {
    let mut worst = 0.0_f64;
    for i in 0..m.nrows() {
        for j in (i + 1)..m.ncols() {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

/// The linear maps `Pᵢ : R^d → R^{dᵢ}` and their weights.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionFamily {
    dim: usize,
    maps: Vec<DMatrix<f64>>,
    weights: Vec<f64>,
}

impl ProjectionFamily {
    pub fn new(dim: usize, maps: Vec<DMatrix<f64>>, weights: Vec<f64>) -> Result<Self> {
        if maps.is_empty() {
            return Err(GwbError::InvalidArgument(
                "a projection family needs at least one map".into(),
            ));
        }
        if dim == 0 {
            return Err(GwbError::InvalidArgument("ambient dimension must be positive".into()));
        }
        if weights.len() != maps.len() {
            return Err(GwbError::dim("number of weights", maps.len(), weights.len()));
        }
        for (i, p) in maps.iter().enumerate() {
            if p.ncols() != dim {
                return Err(GwbError::dim(format!("columns of map {i}"), dim, p.ncols()));
            }
            if p.nrows() == 0 {
                return Err(GwbError::InvalidArgument(format!("map {i} has no rows")));
            }
            if p.iter().any(|v| !v.is_finite()) {
                return Err(GwbError::InvalidArgument(format!("map {i} has non-finite entries")));
            }
        }
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
            return Err(GwbError::InvalidWeights(format!("weight {w} is not positive")));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(GwbError::InvalidWeights(format!(
                "weights sum to {total}, expected 1"
            )));
        }
        Ok(Self { dim, maps, weights })
    }

    /// Like [`ProjectionFamily::new`] but divides the weights by their sum first.
    pub fn normalized(dim: usize, maps: Vec<DMatrix<f64>>, weights: Vec<f64>) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total.is_finite() && total > 0.0) {
            return Err(GwbError::InvalidWeights(format!("weights sum to {total}")));
        }
        let weights = weights.into_iter().map(|w| w / total).collect();
        Self::new(dim, maps, weights)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.maps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.maps.is_empty()
    }

    pub fn maps(&self) -> &[DMatrix<f64>] {
        &self.maps
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn map(&self, i: usize) -> &DMatrix<f64> {
        &self.maps[i]
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    /// `dᵢ`, the dimension of the i-th observation space.
    pub fn target_dim(&self, i: usize) -> usize {
        self.maps[i].nrows()
    }

    /// `D = Σ dᵢ`.
    pub fn total_target_dim(&self) -> usize {
        self.maps.iter().map(|p| p.nrows()).sum()
    }

    /// Applies every map to `x`, returning `(P₁x, …, P_p x)`.
    pub fn project(&self, x: &DVector<f64>) -> Vec<DVector<f64>> {
        self.maps.iter().map(|p| p * x).collect()
    }
}

/// `A = Σ λᵢ PᵢᵀPᵢ`, symmetrized.
pub fn assemble_a(family: &ProjectionFamily) -> DMatrix<f64> {
    let d = family.dim();
    let mut a = DMatrix::zeros(d, d);
    for (p, &w) in family.maps().iter().zip(family.weights()) {
        a += p.transpose() * p * w;
    }
    symmetrize(&a)
}

/// Square root of a symmetric PSD matrix together with its pseudo-inverse on
/// the image.
#[derive(Debug, Clone)]
pub struct SpectralSqrt {
    pub sqrt: DMatrix<f64>,
    /// Acts as `(M^{1/2})⁻¹` on `Im(M)` and as zero on `Ker(M)`.
    pub inv_sqrt_on_image: DMatrix<f64>,
    pub rank: usize,
}

fn checked_eigen(m: &DMatrix<f64>) -> Result<SymmetricEigen<f64, Dyn>> {
    if m.nrows() != m.ncols() {
        return Err(GwbError::dim("square matrix", m.nrows(), m.ncols()));
    }
    let scale = 1.0 + max_abs(m);
    let asym = asymmetry(m);
    if asym > PSD_TOL * scale {
        return Err(GwbError::NotSymmetric { asymmetry: asym });
    }
    let eig = symmetrize(m).symmetric_eigen();
    let lambda_max = eig.eigenvalues.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    if let Some(&neg) = eig
        .eigenvalues
        .iter()
        .find(|v| **v < -PSD_TOL * lambda_max.max(1.0))
    {
        return Err(GwbError::NegativeEigenvalue { eigenvalue: neg });
    }
    Ok(eig)
}

fn spectral_map(eig: &SymmetricEigen<f64, Dyn>, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
    let v = &eig.eigenvectors;
    let mut scaled = v.clone();
    for (j, &lambda) in eig.eigenvalues.iter().enumerate() {
        let s = f(lambda);
        scaled.column_mut(j).scale_mut(s);
    }
    symmetrize(&(scaled * v.transpose()))
}

pub fn psd_sqrt(m: &DMatrix<f64>) -> Result<SpectralSqrt> {
    let eig = checked_eigen(m)?;
    let lambda_max = eig.eigenvalues.iter().fold(0.0_f64, |a, v| a.max(*v));
    let cutoff = RANK_TOL * lambda_max;
    let rank = eig
        .eigenvalues
        .iter()
        .filter(|&&l| l > cutoff && l > 0.0)
        .count();
    let sqrt = spectral_map(&eig, root_of(lambda_max));
    let inv_sqrt_on_image = spectral_map(&eig, |l| {
        if l > cutoff && l > 0.0 {
            1.0 / l.sqrt()
        } else {
            0.0
        }
    });
    Ok(SpectralSqrt {
        sqrt,
        inv_sqrt_on_image,
        rank,
    })
}

/// Shorthand for `psd_sqrt(m)?.sqrt`.
pub fn sqrtm(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let eig = checked_eigen(m)?;
    let lambda_max = eig.eigenvalues.iter().fold(0.0_f64, |a, v| a.max(*v));
    Ok(spectral_map(&eig, root_of(lambda_max)))
}

/// Square root of an eigenvalue, with roundoff-sized ones sent to zero so
/// that rank-deficient inputs do not pick up `O(√ε)` noise.
fn root_of(lambda_max: f64) -> impl Fn(f64) -> f64 {
    let floor = 64.0 * f64::EPSILON * lambda_max;
    move |l| if l > floor { l.sqrt() } else { 0.0 }
}

/// Smallest and largest eigenvalue of a symmetric matrix.
pub fn eigen_range(m: &DMatrix<f64>) -> (f64, f64) {
    let eig = symmetrize(m).symmetric_eigen();
    let lo = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = eig.eigenvalues.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    (lo, hi)
}

/// Singular values of `m` in decreasing order and the matching right singular
/// vectors as columns of a `ncols × ncols` matrix (the trailing columns span
/// the null space).
pub fn full_right_svd(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let (rows, cols) = m.shape();
    let padded = if rows < cols {
        let mut p = DMatrix::zeros(cols, cols);
        p.view_mut((0, 0), (rows, cols)).copy_from(m);
        p
    } else {
        m.clone()
    };
    let svd = padded.svd(false, true);
    let v_t = svd.v_t.expect("requested right singular vectors");
    let mut order: Vec<usize> = (0..cols).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let values = order.iter().map(|&k| svd.singular_values[k]).collect();
    let mut v = DMatrix::zeros(cols, cols);
    for (j, &k) in order.iter().enumerate() {
        v.set_column(j, &v_t.row(k).transpose());
    }
    (values, v)
}

/// Numerical rank with the relative cutoff [`RANK_TOL`].
pub fn numerical_rank(singular_values: &[f64]) -> usize {
    let smax = singular_values.iter().cloned().fold(0.0_f64, f64::max);
    if smax == 0.0 {
        return 0;
    }
    singular_values
        .iter()
        .filter(|&&s| s > RANK_TOL * smax)
        .count()
}

/// Restriction of the problem to `K^⊥`, `K = ∩ Ker(Pᵢ)`.
#[derive(Debug, Clone)]
pub struct ReductionResult {
    /// `d × d̄`, orthonormal columns spanning `K^⊥`.
    pub basis: DMatrix<f64>,
    /// Maps `P̄ᵢ = Pᵢ Q`.
    pub reduced: ProjectionFamily,
    pub reduced_dim: usize,
}

impl ReductionResult {
    pub fn is_trivial(&self) -> bool {
        self.reduced_dim == self.basis.nrows()
    }

    /// Embeds a point of `R^{d̄}` back into `R^d`.
    pub fn lift(&self, y: &DVector<f64>) -> DVector<f64> {
        &self.basis * y
    }
}

pub fn kernel_reduction(family: &ProjectionFamily) -> Result<ReductionResult> {
    let d = family.dim();
    let stacked_rows = family.total_target_dim();
    let mut stacked = DMatrix::zeros(stacked_rows, d);
    let mut row = 0;
    for p in family.maps() {
        stacked.view_mut((row, 0), (p.nrows(), d)).copy_from(p);
        row += p.nrows();
    }
    let (sv, v) = full_right_svd(&stacked);
    let rank = numerical_rank(&sv);
    if rank == 0 {
        return Err(GwbError::Degenerate(
            "every map is zero, the reduced dimension is 0".into(),
        ));
    }
    let (basis, reduced) = if rank == d {
        (DMatrix::identity(d, d), family.clone())
    } else {
        let q = v.columns(0, rank).into_owned();
        let maps = family.maps().iter().map(|p| p * &q).collect();
        (
            q,
            ProjectionFamily::new(rank, maps, family.weights().to_vec())?,
        )
    };
    let a_bar = assemble_a(&reduced);
    let (lo, hi) = eigen_range(&a_bar);
    if lo <= RANK_TOL * hi {
        return Err(GwbError::Internal(format!(
            "reduced A is not positive definite (eigenvalues in [{lo:e}, {hi:e}])"
        )));
    }
    Ok(ReductionResult {
        basis,
        reduced,
        reduced_dim: rank,
    })
}

/// Cached factorizations of `A` for a family whose `A` is invertible.
#[derive(Debug, Clone)]
pub struct Reformulation {
    family: ProjectionFamily,
    a: DMatrix<f64>,
    a_sqrt: DMatrix<f64>,
    a_inv_sqrt: DMatrix<f64>,
    a_chol: Cholesky<f64, Dyn>,
}

impl Reformulation {
    pub fn new(family: &ProjectionFamily) -> Result<Self> {
        let a = assemble_a(family);
        let (lo, hi) = eigen_range(&a);
        if lo.is_nan() || lo <= RANK_TOL * hi {
            return Err(GwbError::SingularA);
        }
        let root = psd_sqrt(&a)?;
        let a_chol = Cholesky::new(a.clone()).ok_or(GwbError::SingularA)?;
        Ok(Self {
            family: family.clone(),
            a,
            a_sqrt: root.sqrt,
            a_inv_sqrt: root.inv_sqrt_on_image,
            a_chol,
        })
    }

    pub fn family(&self) -> &ProjectionFamily {
        &self.family
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn a_sqrt(&self) -> &DMatrix<f64> {
        &self.a_sqrt
    }

    pub fn a_inv_sqrt(&self) -> &DMatrix<f64> {
        &self.a_inv_sqrt
    }

    pub fn solve_a(&self, rhs: &DVector<f64>) -> DVector<f64> {
        self.a_chol.solve(rhs)
    }

    pub fn a_inverse(&self) -> DMatrix<f64> {
        self.a_chol.inverse()
    }

    /// `A^{-1/2} Pᵢᵀ`, a `d × dᵢ` matrix.
    pub fn tilde_map(&self, i: usize) -> DMatrix<f64> {
        &self.a_inv_sqrt * self.family.map(i).transpose()
    }

    /// Generalized Euclidean barycenter `A⁻¹ Σ λᵢ Pᵢᵀ xᵢ`.
    pub fn b_gen(&self, xs: &[DVector<f64>]) -> Result<DVector<f64>> {
        if xs.len() != self.family.len() {
            return Err(GwbError::dim("tuple length", self.family.len(), xs.len()));
        }
        let mut rhs = DVector::zeros(self.family.dim());
        for (i, x) in xs.iter().enumerate() {
            let p = self.family.map(i);
            if x.len() != p.nrows() {
                return Err(GwbError::dim(format!("point {i}"), p.nrows(), x.len()));
            }
            rhs += p.tr_mul(x) * self.family.weight(i);
        }
        Ok(self.solve_a(&rhs))
    }

    /// `Σ λᵢ |xᵢ − Pᵢ B_gen(x)|²`.
    pub fn mm_cost(&self, xs: &[DVector<f64>]) -> Result<f64> {
        let y = self.b_gen(xs)?;
        Ok(xs
            .iter()
            .enumerate()
            .map(|(i, x)| self.family.weight(i) * (x - self.family.map(i) * &y).norm_squared())
            .sum())
    }

    /// Offset `C` with `F(γ) = C + G(A^{1/2}#γ)`, from the second-moment
    /// matrices `E[xxᵀ]` of each marginal.
    pub fn constant_c(&self, second_moments: &[DMatrix<f64>]) -> Result<f64> {
        if second_moments.len() != self.family.len() {
            return Err(GwbError::dim(
                "number of moment matrices",
                self.family.len(),
                second_moments.len(),
            ));
        }
        let a_inv = self.a_inverse();
        let mut c = 0.0;
        for (i, m) in second_moments.iter().enumerate() {
            let p = self.family.map(i);
            if m.nrows() != p.nrows() || m.ncols() != p.nrows() {
                return Err(GwbError::dim(format!("moment matrix {i}"), p.nrows(), m.nrows()));
            }
            let inner = p * &a_inv * p.transpose();
            c += self.family.weight(i) * (m.trace() - (inner * m).trace());
        }
        Ok(c)
    }
}

pub fn tilde_map(family: &ProjectionFamily, i: usize) -> Result<DMatrix<f64>> {
    if i >= family.len() {
        return Err(GwbError::InvalidArgument(format!("no map with index {i}")));
    }
    Ok(Reformulation::new(family)?.tilde_map(i))
}

pub fn constant_c(family: &ProjectionFamily, second_moments: &[DMatrix<f64>]) -> Result<f64> {
    Reformulation::new(family)?.constant_c(second_moments)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::dmatrix;

    fn axes_family() -> ProjectionFamily {
        ProjectionFamily::new(2, vec![dmatrix![1.0, 0.0], dmatrix![0.0, 1.0]], vec![0.5, 0.5])
            .unwrap()
    }

    fn three_axis_family() -> ProjectionFamily {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        ProjectionFamily::new(
            2,
            vec![dmatrix![1.0, 0.0], dmatrix![0.0, 1.0], dmatrix![s, s]],
            vec![1.0 / 3.0, 1.0 / 3.0, 1.0 - 2.0 / 3.0],
        )
        .unwrap()
    }

    #[test]
    fn assemble_two_axes() {
        let a = assemble_a(&axes_family());
        assert_relative_eq!(a, DMatrix::identity(2, 2) * 0.5, epsilon = 1e-15);
    }

    #[test]
    fn assemble_identity_map() {
        let f = ProjectionFamily::new(3, vec![DMatrix::identity(3, 3)], vec![1.0]).unwrap();
        assert_relative_eq!(assemble_a(&f), DMatrix::identity(3, 3), epsilon = 1e-15);
    }

    #[test]
    fn assemble_three_axes() {
        let a = assemble_a(&three_axis_family());
        let expected = dmatrix![1.5, 0.5; 0.5, 1.5] / 3.0;
        assert_relative_eq!(a, expected, epsilon = 1e-14);
        assert_eq!(asymmetry(&a), 0.0);
    }

    #[test]
    fn family_rejects_bad_input() {
        assert!(matches!(
            ProjectionFamily::new(2, vec![dmatrix![1.0, 0.0, 0.0]], vec![1.0]),
            Err(GwbError::Dimension { .. })
        ));
        assert!(matches!(
            ProjectionFamily::new(2, vec![dmatrix![1.0, 0.0]], vec![0.9]),
            Err(GwbError::InvalidWeights(_))
        ));
        assert!(matches!(
            ProjectionFamily::new(
                2,
                vec![dmatrix![1.0, 0.0], dmatrix![0.0, 1.0]],
                vec![1.5, -0.5]
            ),
            Err(GwbError::InvalidWeights(_))
        ));
    }

    #[test]
    fn sqrt_of_identity() {
        let r = psd_sqrt(&DMatrix::identity(4, 4)).unwrap();
        assert_relative_eq!(r.sqrt, DMatrix::identity(4, 4), epsilon = 1e-14);
        assert_eq!(r.rank, 4);
    }

    #[test]
    fn sqrt_of_singular_diagonal() {
        let r = psd_sqrt(&dmatrix![4.0, 0.0; 0.0, 0.0]).unwrap();
        assert_relative_eq!(r.sqrt, dmatrix![2.0, 0.0; 0.0, 0.0], epsilon = 1e-14);
        assert_relative_eq!(r.inv_sqrt_on_image, dmatrix![0.5, 0.0; 0.0, 0.0], epsilon = 1e-14);
        assert_eq!(r.rank, 1);
    }

    #[test]
    fn sqrt_of_two_by_two() {
        let m = dmatrix![2.0, 1.0; 1.0, 2.0];
        let r = psd_sqrt(&m).unwrap();
        assert_relative_eq!(&r.sqrt * &r.sqrt, m, epsilon = 1e-12);
        // eigenvalues 3 and 1: sqrt = ((√3+1)/2) I-part + ((√3−1)/2) J-part
        let a = (3f64.sqrt() + 1.0) / 2.0;
        let b = (3f64.sqrt() - 1.0) / 2.0;
        assert_relative_eq!(r.sqrt, dmatrix![a, b; b, a], epsilon = 1e-12);
    }

    #[test]
    fn sqrt_rejects_bad_input() {
        assert!(matches!(
            psd_sqrt(&dmatrix![1.0, 0.5; 0.0, 1.0]),
            Err(GwbError::NotSymmetric { .. })
        ));
        assert!(matches!(
            psd_sqrt(&dmatrix![1.0, 0.0; 0.0, -1e-3]),
            Err(GwbError::NegativeEigenvalue { .. })
        ));
        // round-off negatives are clamped
        let r = psd_sqrt(&dmatrix![1.0, 0.0; 0.0, -1e-13]).unwrap();
        assert_eq!(r.rank, 1);
        assert_eq!(r.sqrt[(1, 1)], 0.0);
    }

    #[test]
    fn inv_sqrt_projects_onto_image() {
        let u = DVector::from_vec(vec![1.0, 2.0, -1.0]);
        let w = DVector::from_vec(vec![0.0, 1.0, 1.0]);
        let m = &u * u.transpose() + &w * w.transpose() * 3.0;
        let r = psd_sqrt(&m).unwrap();
        assert_eq!(r.rank, 2);
        let proj = &r.inv_sqrt_on_image * &r.sqrt;
        assert_relative_eq!(&proj * &proj, proj.clone(), epsilon = 1e-10);
        assert_relative_eq!(&proj * &u, u, epsilon = 1e-10);
    }

    #[test]
    fn reduction_full_rank_is_identity() {
        let r = kernel_reduction(&axes_family()).unwrap();
        assert!(r.is_trivial());
        assert_eq!(r.basis, DMatrix::identity(2, 2));
        assert_eq!(r.reduced, axes_family());
    }

    #[test]
    fn reduction_single_axis() {
        let f = ProjectionFamily::new(2, vec![dmatrix![1.0, 0.0]], vec![1.0]).unwrap();
        let r = kernel_reduction(&f).unwrap();
        assert_eq!(r.reduced_dim, 1);
        assert_relative_eq!(r.basis[(0, 0)].abs(), 1.0, epsilon = 1e-14);
        assert_relative_eq!(r.basis[(1, 0)], 0.0, epsilon = 1e-14);
    }

    #[test]
    fn reduction_in_three_dimensions() {
        let f = ProjectionFamily::new(
            3,
            vec![dmatrix![1.0, 1.0, 0.0], dmatrix![0.0, 1.0, 1.0]],
            vec![0.5, 0.5],
        )
        .unwrap();
        let r = kernel_reduction(&f).unwrap();
        assert_eq!(r.reduced_dim, 2);
        // K = span(1, −1, 1) is orthogonal to the basis
        let k = DVector::from_vec(vec![1.0, -1.0, 1.0]);
        assert_relative_eq!((r.basis.transpose() * k).norm(), 0.0, epsilon = 1e-12);
        assert_relative_eq!(
            r.basis.transpose() * &r.basis,
            DMatrix::identity(2, 2),
            epsilon = 1e-12
        );
    }

    #[test]
    fn reduction_of_zero_maps_fails() {
        let f = ProjectionFamily::new(2, vec![dmatrix![0.0, 0.0]], vec![1.0]).unwrap();
        assert!(matches!(kernel_reduction(&f), Err(GwbError::Degenerate(_))));
    }

    #[test]
    fn tilde_map_two_axes() {
        let t = tilde_map(&axes_family(), 0).unwrap();
        let s2 = 2f64.sqrt();
        assert_relative_eq!(t, dmatrix![s2; 0.0], epsilon = 1e-14);
        // covariance of the pushed N(0,1)
        assert_relative_eq!(&t * t.transpose(), dmatrix![2.0, 0.0; 0.0, 0.0], epsilon = 1e-14);
    }

    #[test]
    fn tilde_map_identity_and_residual() {
        let f = ProjectionFamily::new(2, vec![DMatrix::identity(2, 2)], vec![1.0]).unwrap();
        assert_relative_eq!(tilde_map(&f, 0).unwrap(), DMatrix::identity(2, 2), epsilon = 1e-14);

        let f = three_axis_family();
        let reform = Reformulation::new(&f).unwrap();
        for i in 0..3 {
            let residual = reform.a_sqrt() * reform.tilde_map(i) - f.map(i).transpose();
            assert!(residual.norm() < 1e-12);
        }
    }

    #[test]
    fn tilde_map_needs_invertible_a() {
        let f = ProjectionFamily::new(2, vec![dmatrix![1.0, 0.0]], vec![1.0]).unwrap();
        assert!(matches!(tilde_map(&f, 0), Err(GwbError::SingularA)));
    }

    #[test]
    fn constant_c_cases() {
        let rot = dmatrix![0.6, -0.8; 0.8, 0.6];
        let f = ProjectionFamily::new(2, vec![rot, DMatrix::identity(2, 2)], vec![0.3, 0.7])
            .unwrap();
        let m = dmatrix![2.0, 0.3; 0.3, 1.0];
        assert_relative_eq!(constant_c(&f, &[m.clone(), m]).unwrap(), 0.0, epsilon = 1e-12);

        let unit = DMatrix::from_element(1, 1, 1.0);
        assert_relative_eq!(
            constant_c(&axes_family(), &[unit.clone(), unit]).unwrap(),
            -1.0,
            epsilon = 1e-14
        );

        let zero = DMatrix::zeros(1, 1);
        assert_eq!(constant_c(&axes_family(), &[zero.clone(), zero]).unwrap(), 0.0);
    }

    #[test]
    fn b_gen_on_two_axes() {
        let reform = Reformulation::new(&axes_family()).unwrap();
        let y = reform
            .b_gen(&[DVector::from_element(1, 0.7), DVector::from_element(1, -1.3)])
            .unwrap();
        assert_relative_eq!(y, DVector::from_vec(vec![0.7, -1.3]), epsilon = 1e-14);
    }
}
