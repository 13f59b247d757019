//! Gaussian-process regression of the unknown ultimate-reward function `f`
//! on the unmatched dataset D₂, under the nuclear dominant kernel.
//!
//! Supplies the posterior mean weights `α = (R_{r̃r̃} + λ_f I)⁻¹ y` and the
//! posterior covariance `R̄` that the moment-matched estimator consumes.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::kernels::{cross_gram, gram, KernelFamily, KernelSpec};
use crate::linalg::SpdFactor;
use crate::scalar::Scalar;

/// The unmatched dataset D₂: pairs of intermediate reward r̃ and ultimate
/// reward y. May be empty only before the first round of an m = 0 trial;
/// the harness guards fitting on empty data.
#[derive(Debug, Clone, Default)]
pub struct UnmatchedDataset<S: Scalar> {
    points: Vec<Vec<S>>,
    ys: Vec<S>,
}

impl<S: Scalar> UnmatchedDataset<S> {
    pub fn new() -> Self {
        Self { points: Vec::new(), ys: Vec::new() }
    }

    pub fn from_pairs(points: Vec<Vec<S>>, ys: Vec<S>) -> Result<Self> {
        if points.len() != ys.len() {
            return Err(Error::ShapeMismatch {
                lhs_rows: points.len(),
                lhs_cols: 1,
                rhs_rows: ys.len(),
                rhs_cols: 1,
            });
        }
        let mut d = Self::new();
        for (p, y) in points.into_iter().zip(ys) {
            d.push(p, y)?;
        }
        Ok(d)
    }

    /// Appends one `(r̃, y)` pair, validating finiteness and dimension.
    pub fn push(&mut self, point: Vec<S>, y: S) -> Result<()> {
        if point.is_empty() {
            return Err(Error::EmptyInput("unmatched point"));
        }
        if let Some(first) = self.points.first() {
            if point.len() != first.len() {
                return Err(Error::DimensionMismatch { expected: first.len(), got: point.len() });
            }
        }
        if point.iter().any(|v| !v.is_finite()) || !y.is_finite() {
            return Err(Error::NonFinite("unmatched pair"));
        }
        self.points.push(point);
        self.ys.push(y);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Vec<S>] {
        &self.points
    }

    pub fn ys(&self) -> &[S] {
        &self.ys
    }

    pub fn ys_vector(&self) -> DVector<S> {
        DVector::from_row_slice(&self.ys)
    }
}

/// Posterior of `f` after regression on D₂: training points, mean weights,
/// noise level, kernel, and the cached `(R_{r̃r̃} + λ_f I)` factorization.
pub struct FPosterior<S: Scalar> {
    train: Vec<Vec<S>>,
    alpha: DVector<S>,
    noise: S,
    kernel: KernelSpec<S>,
    factor: SpdFactor<S>,
}

/// Fits the GP posterior of `f` on D₂ with the given nuclear dominant kernel
/// and noise λ_f. One regularized solve; the factorization is cached for
/// covariance queries.
pub fn fit_f<S: Scalar>(
    d2: &UnmatchedDataset<S>,
    kernel: &KernelSpec<S>,
    noise: S,
) -> Result<FPosterior<S>> {
    if d2.is_empty() {
        return Err(Error::EmptyInput("fit_f on empty unmatched dataset"));
    }
    if kernel.family != KernelFamily::NuclearDominantSE {
        return Err(Error::InvalidParameter(format!(
            "fit_f requires a NuclearDominantSE kernel, got {:?}",
            kernel.family
        )));
    }
    if !(noise.is_finite() && noise > S::zero()) {
        return Err(Error::InvalidParameter(format!("noise must be positive, got {noise:?}")));
    }
    let r = gram(kernel, d2.points())?;
    let factor = SpdFactor::new(&r, noise)?;
    let alpha = factor.solve_vec(&d2.ys_vector())?;
    Ok(FPosterior { train: d2.points().to_vec(), alpha, noise, kernel: *kernel, factor })
}

impl<S: Scalar> FPosterior<S> {
    pub fn train_points(&self) -> &[Vec<S>] {
        &self.train
    }

    /// The mean weight vector `α = (R_{r̃r̃} + λ_f I)⁻¹ y`.
    pub fn alpha(&self) -> &DVector<S> {
        &self.alpha
    }

    pub fn noise(&self) -> S {
        self.noise
    }

    pub fn kernel(&self) -> &KernelSpec<S> {
        &self.kernel
    }

    /// Posterior mean at the query points: `R_{p r̃} α`.
    pub fn posterior_mean_at(&self, points: &[Vec<S>]) -> Result<DVector<S>> {
        let kx = cross_gram(&self.kernel, points, &self.train)?;
        Ok(&kx * &self.alpha)
    }

    /// Posterior covariance at the query points:
    /// `R_pp − R_{p r̃} (R_{r̃r̃} + λ_f I)⁻¹ R_{r̃ p}`.
    ///
    /// The result is symmetrized to remove round-off asymmetry; it is PSD up
    /// to round-off of order 1e-8 · scale.
    pub fn posterior_cov_at(&self, points: &[Vec<S>]) -> Result<DMatrix<S>> {
        let r_pp = gram(&self.kernel, points)?;
        let r_pt = cross_gram(&self.kernel, points, &self.train)?;
        let w = self.factor.solve_mat(&r_pt.transpose())?;
        let reduction = &r_pt * &w;
        let raw = r_pp - reduction;
        let half = S::lit(0.5);
        Ok((&raw + raw.transpose()) * half)
    }
}
