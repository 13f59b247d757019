//! Regularized symmetric solves with jitter escalation, plus small symmetric
//! eigenvalue helpers used by property tests.
//!
//! Every `(· + λI)⁻¹` application in the estimators goes through
//! [`SpdFactor`], so the escalation policy (and the jitter actually applied)
//! is uniform and observable across the crate.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Escalation start, as a fraction of the mean diagonal.
const JITTER_START_REL: f64 = 1e-10;
/// Escalation cap, as a fraction of the mean diagonal.
const JITTER_MAX_REL: f64 = 1e-4;
/// Multiplier per retry.
const JITTER_GROWTH: f64 = 10.0;

/// Cached Cholesky factorization of `A + ridge·I (+ escalation jitter)`.
///
/// A failed factorization escalates an additional jitter starting at
/// `1e-10 · mean diagonal`, multiplying by 10 per retry up to
/// `1e-4 · mean diagonal`; past that the matrix is reported singular.
/// The jitter actually added is recorded in [`SpdFactor::jitter_added`].
pub struct SpdFactor<S: Scalar> {
    chol: Cholesky<S, Dyn>,
    jitter_added: S,
    dim: usize,
}

impl<S: Scalar> SpdFactor<S> {
    /// Factorizes `a + ridge·I`. `a` must be square and symmetric.
    pub fn new(a: &DMatrix<S>, ridge: S) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(Error::ShapeMismatch {
                lhs_rows: a.nrows(),
                lhs_cols: a.ncols(),
                rhs_rows: a.nrows(),
                rhs_cols: a.nrows(),
            });
        }
        if a.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("SpdFactor input"));
        }
        let n = a.nrows();
        let mut base = a.clone();
        for i in 0..n {
            base[(i, i)] += ridge;
        }
        let scale = {
            let md = mean_diagonal(&base);
            if md > S::zero() {
                md
            } else {
                S::one()
            }
        };
        if let Some(chol) = Cholesky::new(base.clone()) {
            return Ok(Self { chol, jitter_added: S::zero(), dim: n });
        }
        let mut jitter = scale * S::lit(JITTER_START_REL);
        let cap = scale * S::lit(JITTER_MAX_REL);
        while jitter <= cap {
            let mut attempt = base.clone();
            for i in 0..n {
                attempt[(i, i)] += jitter;
            }
            if let Some(chol) = Cholesky::new(attempt) {
                return Ok(Self { chol, jitter_added: jitter, dim: n });
            }
            jitter *= S::lit(JITTER_GROWTH);
        }
        Err(Error::Singular { jitter_reached: cap.to_f64_lossy() })
    }

    /// Additional jitter the escalation had to add (zero on the happy path).
    pub fn jitter_added(&self) -> S {
        self.jitter_added
    }

    /// Dimension of the factored matrix.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Solves `(A + ridge·I + jitter·I) X = B` for a matrix right-hand side.
    pub fn solve_mat(&self, b: &DMatrix<S>) -> Result<DMatrix<S>> {
        if b.nrows() != self.dim {
            return Err(Error::ShapeMismatch {
                lhs_rows: self.dim,
                lhs_cols: self.dim,
                rhs_rows: b.nrows(),
                rhs_cols: b.ncols(),
            });
        }
        Ok(self.chol.solve(b))
    }

    /// Solves for a vector right-hand side.
    pub fn solve_vec(&self, b: &DVector<S>) -> Result<DVector<S>> {
        if b.nrows() != self.dim {
            return Err(Error::ShapeMismatch {
                lhs_rows: self.dim,
                lhs_cols: self.dim,
                rhs_rows: b.nrows(),
                rhs_cols: 1,
            });
        }
        Ok(self.chol.solve(b))
    }
}

/// One-shot `(A + ridge·I)⁻¹ B` for a matrix right-hand side.
///
/// Returns the solution together with the escalation jitter that was needed
/// (zero when the factorization succeeded directly).
pub fn regularized_solve<S: Scalar>(
    a: &DMatrix<S>,
    b: &DMatrix<S>,
    ridge: S,
) -> Result<(DMatrix<S>, S)> {
    let f = SpdFactor::new(a, ridge)?;
    Ok((f.solve_mat(b)?, f.jitter_added()))
}

/// One-shot `(A + ridge·I)⁻¹ b` for a vector right-hand side.
pub fn regularized_solve_vec<S: Scalar>(
    a: &DMatrix<S>,
    b: &DVector<S>,
    ridge: S,
) -> Result<(DVector<S>, S)> {
    let f = SpdFactor::new(a, ridge)?;
    Ok((f.solve_vec(b)?, f.jitter_added()))
}

/// Mean of the diagonal entries (scale reference for relative jitters).
pub fn mean_diagonal<S: Scalar>(a: &DMatrix<S>) -> S {
    let n = a.nrows().min(a.ncols());
    if n == 0 {
        return S::zero();
    }
    let mut acc = S::zero();
    for i in 0..n {
        acc += a[(i, i)];
    }
    acc / S::from_usize(n).unwrap()
}

/// Smallest eigenvalue of a symmetric matrix (used by PSD property checks).
pub fn sym_min_eigenvalue<S: Scalar>(a: &DMatrix<S>) -> Result<S> {
    if a.nrows() != a.ncols() {
        return Err(Error::ShapeMismatch {
            lhs_rows: a.nrows(),
            lhs_cols: a.ncols(),
            rhs_rows: a.nrows(),
            rhs_cols: a.nrows(),
        });
    }
    if a.is_empty() {
        return Err(Error::EmptyInput("sym_min_eigenvalue"));
    }
    let eig = a.clone().symmetric_eigenvalues();
    let mut min = eig[0];
    for x in eig.iter().copied() {
        if x < min {
            min = x;
        }
    }
    Ok(min)
}
