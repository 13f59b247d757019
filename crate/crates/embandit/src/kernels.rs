//! Kernel families, Gram/cross-Gram assembly, and Hadamard products.
//!
//! Three families cover every estimator in the crate: squared-exponential,
//! Matérn-5/2, and the "nuclear dominant" widening of a squared-exponential,
//! i.e. the self-convolution `r(y1,y2) = ∫ k(y1,u) k(u,y2) du` against the
//! translation-invariant measure on ℝ^d, which has the closed form
//! `σ⁴ (√π ℓ)^d exp(−‖y1−y2‖² / 4ℓ²)`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Kernel family tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum KernelFamily {
    SquaredExponential,
    Matern52,
    /// Self-convolution of a squared-exponential base; stores the base's
    /// lengthscale and amplitude. Only constructible from an SE spec.
    NuclearDominantSE,
}

/// A parameterized kernel: family plus lengthscale/amplitude.
///
/// `amplitude` is the output variance of the base kernel (its value at zero
/// distance); for `NuclearDominantSE` the stored fields are those of the SE
/// base, and the value at zero distance is `amplitude² (√π lengthscale)^d`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec<S: Scalar> {
    pub family: KernelFamily,
    pub lengthscale: S,
    pub amplitude: S,
}

impl<S: Scalar> KernelSpec<S> {
    fn validated(family: KernelFamily, lengthscale: S, amplitude: S) -> Result<Self> {
        if !(lengthscale.is_finite() && lengthscale > S::zero()) {
            return Err(Error::InvalidParameter(format!(
                "lengthscale must be positive and finite, got {lengthscale:?}"
            )));
        }
        if !(amplitude.is_finite() && amplitude > S::zero()) {
            return Err(Error::InvalidParameter(format!(
                "amplitude must be positive and finite, got {amplitude:?}"
            )));
        }
        Ok(Self { family, lengthscale, amplitude })
    }

    /// Squared-exponential kernel `σ² exp(−‖x1−x2‖² / 2ℓ²)`.
    pub fn squared_exponential(lengthscale: S, amplitude: S) -> Result<Self> {
        Self::validated(KernelFamily::SquaredExponential, lengthscale, amplitude)
    }

    /// Matérn kernel of smoothness 5/2.
    pub fn matern52(lengthscale: S, amplitude: S) -> Result<Self> {
        Self::validated(KernelFamily::Matern52, lengthscale, amplitude)
    }

    /// Nuclear dominant widening of a squared-exponential base.
    ///
    /// Rejects any non-SE base: the closed form below is specific to the
    /// Gaussian self-convolution.
    pub fn nuclear_dominant_from(base: &KernelSpec<S>) -> Result<Self> {
        if base.family != KernelFamily::SquaredExponential {
            return Err(Error::InvalidParameter(format!(
                "nuclear dominant kernel requires a SquaredExponential base, got {:?}",
                base.family
            )));
        }
        Self::validated(KernelFamily::NuclearDominantSE, base.lengthscale, base.amplitude)
    }

    /// Returns a copy with a different lengthscale (family and amplitude kept).
    pub fn with_lengthscale(&self, lengthscale: S) -> Result<Self> {
        Self::validated(self.family, lengthscale, self.amplitude)
    }
}

/// The kernel trio every estimator consumes: context kernel `k_s`, action
/// kernel `k_a`, and intermediate-reward kernel `k_r`. The moment-matched
/// estimator additionally derives the nuclear dominant widening of `k_r`
/// (which therefore must be squared-exponential there).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSet<S: Scalar> {
    pub k_s: KernelSpec<S>,
    pub k_a: KernelSpec<S>,
    pub k_r: KernelSpec<S>,
}

/// Evaluates the kernel at a pair of points. Symmetric in its arguments.
pub fn kernel_eval<S: Scalar>(spec: &KernelSpec<S>, x1: &[S], x2: &[S]) -> Result<S> {
    if x1.len() != x2.len() {
        return Err(Error::DimensionMismatch { expected: x1.len(), got: x2.len() });
    }
    if x1.is_empty() {
        return Err(Error::EmptyInput("kernel_eval point"));
    }
    if x1.iter().chain(x2.iter()).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("kernel_eval point"));
    }
    let mut sq = S::zero();
    for (a, b) in x1.iter().zip(x2.iter()) {
        let d = *a - *b;
        sq += d * d;
    }
    let l = spec.lengthscale;
    let s2 = spec.amplitude;
    let two = S::lit(2.0);
    Ok(match spec.family {
        KernelFamily::SquaredExponential => s2 * (-sq / (two * l * l)).exp(),
        KernelFamily::Matern52 => {
            let u = sq.sqrt() / l;
            let sqrt5 = S::lit(5.0).sqrt();
            let five_thirds = S::lit(5.0 / 3.0);
            s2 * (S::one() + sqrt5 * u + five_thirds * u * u) * (-sqrt5 * u).exp()
        }
        KernelFamily::NuclearDominantSE => {
            let d = S::from_usize(x1.len()).unwrap();
            let amp = s2 * s2 * (S::pi().sqrt() * l).powf(d);
            amp * (-sq / (S::lit(4.0) * l * l)).exp()
        }
    })
}

/// Evaluates the nuclear dominant widening of an SE base at `(y1, y2)`.
pub fn nuclear_dominant_eval<S: Scalar>(base: &KernelSpec<S>, y1: &[S], y2: &[S]) -> Result<S> {
    let widened = KernelSpec::nuclear_dominant_from(base)?;
    kernel_eval(&widened, y1, y2)
}

fn check_points<S: Scalar>(points: &[Vec<S>], what: &'static str) -> Result<usize> {
    let first = points.first().ok_or(Error::EmptyInput(what))?;
    let dim = first.len();
    if dim == 0 {
        return Err(Error::EmptyInput(what));
    }
    for p in points {
        if p.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: p.len() });
        }
    }
    Ok(dim)
}

/// Gram matrix over one point set: entry `(i, j) = k(points[i], points[j])`.
///
/// Filled from the upper triangle, so the output is exactly symmetric.
pub fn gram<S: Scalar>(spec: &KernelSpec<S>, points: &[Vec<S>]) -> Result<DMatrix<S>> {
    check_points(points, "gram points")?;
    let n = points.len();
    let mut out = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = kernel_eval(spec, &points[i], &points[j])?;
            out[(i, j)] = v;
            out[(j, i)] = v;
        }
    }
    Ok(out)
}

/// Cross-Gram matrix: entry `(i, j) = k(points_a[i], points_b[j])`.
pub fn cross_gram<S: Scalar>(
    spec: &KernelSpec<S>,
    points_a: &[Vec<S>],
    points_b: &[Vec<S>],
) -> Result<DMatrix<S>> {
    let da = check_points(points_a, "cross_gram left points")?;
    let db = check_points(points_b, "cross_gram right points")?;
    if da != db {
        return Err(Error::DimensionMismatch { expected: da, got: db });
    }
    let mut out = DMatrix::zeros(points_a.len(), points_b.len());
    for i in 0..points_a.len() {
        for j in 0..points_b.len() {
            out[(i, j)] = kernel_eval(spec, &points_a[i], &points_b[j])?;
        }
    }
    Ok(out)
}

/// Entrywise (Hadamard) product of two equal-shape matrices.
pub fn hadamard<S: Scalar>(a: &DMatrix<S>, b: &DMatrix<S>) -> Result<DMatrix<S>> {
    if a.shape() != b.shape() {
        return Err(Error::ShapeMismatch {
            lhs_rows: a.nrows(),
            lhs_cols: a.ncols(),
            rhs_rows: b.nrows(),
            rhs_cols: b.ncols(),
        });
    }
    Ok(a.component_mul(b))
}
