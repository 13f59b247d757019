//! Moment-matched estimator for `g(a) = ⟨f, μ_{R|s_t,a}⟩`: closed-form
//! posterior mean `m₃(a)` and covariance `κ(a, a′)` combining the embedding
//! uncertainty from D₁ with the GP uncertainty about `f` from D₂.
//!
//! With `r̂ = (r, r̃)` the concatenation of matched and unmatched
//! intermediate rewards, `K_·` Gram matrices of the base reward kernel,
//! `R_·` Gram matrices of its nuclear dominant widening, `E_a = Φ(s_t,a)ᵀ
//! (K+λI)⁻¹`, and `R̄` the posterior covariance of `f` at `r̂`:
//!
//! ```text
//! m₃(a)    = E_a K_{r r̂} K_{r̂r̂}⁻¹ R_{r̂ r̃} (R_{r̃r̃} + λ_f I)⁻¹ y
//! κ(a,a′)  = E_a Θ₁ᵀ R̄ Θ₁ E_{a′}ᵀ + (Θ₂ᵃ + Θ₃ᵃ) F_{aa′} − (Θ₂ᵇ + Θ₃ᵇ) G_{aa′}
//! Θ₁ = K_{r̂r̂}⁻¹ R_{r̂ r} R_{rr}⁻¹ K_{rr}      Θ₄ = K_{r̂r̂}⁻¹ R_{r̂ r̃} (R_{r̃r̃}+λ_f I)⁻¹ y
//! Θ₂ᵃ = Θ₄ᵀ R_{r̂r̂} Θ₄                        Θ₂ᵇ = Θ₄ᵀ R_{r̂ r} R_{rr}⁻¹ R_{r r̂} Θ₄
//! Θ₃ᵃ = tr(K_{r̂r̂}⁻¹ R_{r̂r̂} K_{r̂r̂}⁻¹ R̄)     Θ₃ᵇ = tr(R_{r̂ r} R_{rr}⁻¹ R_{r r̂} K_{r̂r̂}⁻¹ R̄ K_{r̂r̂}⁻¹)
//! F_{aa′} = k_s(s_t,s_t) · k_a(a,a′)           G_{aa′} = Φ(s_t,a)ᵀ (K+λI)⁻¹ Φ(s_t,a′)
//! ```
//!
//! Two reading choices are deliberate and recorded here because the source
//! formulas print differently:
//! * `F` is taken as the exact joint kernel with `a′` in the second slot
//!   (printed as `Φ(s_t,a)ᵀΦ(s_t,a)`), so that `κ` is a genuine covariance
//!   function of the action pair;
//! * `Θ₄` regularizes with `(R_{r̃r̃} + λ_f I)⁻¹` (printed with `K_{r̃r̃}`),
//!   consistent with the `f` posterior and with `m₃`'s own chain; and
//! * the `R̂` appearing in the first κ term is the same object as `R̄`, the
//!   posterior covariance of `f` at `r̂` (only one such covariance exists).
//!
//! `K_{r̂r̂}` and `R_{rr}` appear as plain (unregularized) inverses; in the
//! matched regime `r̂` contains every matched `r` twice, making them exactly
//! singular. `build_round_state` therefore takes `lambda_r_jitter`, a ridge
//! expressed as a fraction of each matrix's mean diagonal, and the solver
//! escalates further jitter if the factorization still fails.

use std::sync::atomic::{AtomicUsize, Ordering};

use nalgebra::{DMatrix, DVector};

use crate::cme::{joint_feature_matrix, MatchedDataset};
use crate::error::{Error, Result};
use crate::gp::{fit_f, FPosterior, UnmatchedDataset};
use crate::kernels::{cross_gram, gram, hadamard, kernel_eval, KernelSet, KernelSpec};
use crate::linalg::{mean_diagonal, SpdFactor};
use crate::policies::PosteriorStats;
use crate::scalar::Scalar;

/// Immutable per-round cache: every Θ quantity of the closed form, the
/// shared factorizations, and the query context. Action queries are pure;
/// the only mutable piece is the clamp diagnostic counter.
pub struct RoundState<S: Scalar> {
    contexts: Vec<Vec<S>>,
    actions: Vec<Vec<S>>,
    r_hat: Vec<Vec<S>>,
    s_t: Vec<S>,
    kernels: KernelSet<S>,
    /// Context-kernel evaluations `k_s(s_i, s_t)`, shared by all queries.
    phi_context: Vec<S>,
    factor_k: SpdFactor<S>,
    factor_khh: SpdFactor<S>,
    factor_rrr: SpdFactor<S>,
    f_posterior: FPosterior<S>,
    /// `(K+λI)⁻¹ K_{r r̂} Θ₄`; the mean is `Φ(s_t,a)ᵀ w_mean`.
    w_mean: DVector<S>,
    /// `Θ₁ᵀ R̄ Θ₁`, symmetrized.
    big_c: DMatrix<S>,
    theta1: DMatrix<S>,
    theta4: DVector<S>,
    theta2_a: S,
    theta2_b: S,
    theta3_a: S,
    theta3_b: S,
    k_ss_query: S,
    clamp_count: AtomicUsize,
}

/// Builds the round state for context `s_t` from both datasets.
///
/// `lambda_r_jitter` is the ridge for the two unregularized inverses
/// (`K_{r̂r̂}⁻¹`, `R_{rr}⁻¹`), expressed as a fraction of the respective
/// matrix's mean diagonal. Zero is accepted; duplicate rows then rely on
/// the solver's own escalation.
#[allow(clippy::too_many_arguments)]
pub fn build_round_state<S: Scalar>(
    d1: &MatchedDataset<S>,
    d2: &UnmatchedDataset<S>,
    kernels: &KernelSet<S>,
    lambda: S,
    lambda_f: S,
    lambda_r_jitter: S,
    s_t: &[S],
) -> Result<RoundState<S>> {
    if d1.is_empty() {
        return Err(Error::EmptyInput("matched dataset"));
    }
    if d2.is_empty() {
        return Err(Error::EmptyInput("unmatched dataset"));
    }
    if !(lambda.is_finite() && lambda > S::zero()) {
        return Err(Error::InvalidParameter(format!("lambda must be positive, got {lambda:?}")));
    }
    if !(lambda_r_jitter.is_finite() && lambda_r_jitter >= S::zero()) {
        return Err(Error::InvalidParameter(format!(
            "lambda_r_jitter must be nonnegative, got {lambda_r_jitter:?}"
        )));
    }
    let d_r = d1.rewards()[0].len();
    if d2.points()[0].len() != d_r {
        return Err(Error::DimensionMismatch { expected: d_r, got: d2.points()[0].len() });
    }

    let nuclear = KernelSpec::nuclear_dominant_from(&kernels.k_r)?;
    let f_posterior = fit_f(d2, &nuclear, lambda_f)?;

    // r̂ = (r, r̃): matched rewards first, then the unmatched ones.
    let mut r_hat: Vec<Vec<S>> = d1.rewards().to_vec();
    r_hat.extend(d2.points().iter().cloned());

    let k_ss = gram(&kernels.k_s, d1.contexts())?;
    let k_aa = gram(&kernels.k_a, d1.actions())?;
    let k = hadamard(&k_ss, &k_aa)?;
    let factor_k = SpdFactor::new(&k, lambda)?;

    let k_hh = gram(&kernels.k_r, &r_hat)?;
    let k_rh = cross_gram(&kernels.k_r, d1.rewards(), &r_hat)?;
    let k_rr = gram(&kernels.k_r, d1.rewards())?;
    let r_hh = gram(&nuclear, &r_hat)?;
    let r_hr = cross_gram(&nuclear, &r_hat, d1.rewards())?;
    let r_ht = cross_gram(&nuclear, &r_hat, d2.points())?;
    let r_rr = gram(&nuclear, d1.rewards())?;

    let factor_khh = SpdFactor::new(&k_hh, lambda_r_jitter * mean_diagonal(&k_hh))?;
    let factor_rrr = SpdFactor::new(&r_rr, lambda_r_jitter * mean_diagonal(&r_rr))?;

    let theta4 = factor_khh.solve_vec(&(&r_ht * f_posterior.alpha()))?;
    let z = factor_rrr.solve_mat(&k_rr)?;
    let theta1 = factor_khh.solve_mat(&(&r_hr * z))?;

    let r_bar = f_posterior.posterior_cov_at(&r_hat)?;

    let theta2_a = (&r_hh * &theta4).dot(&theta4);
    let u = r_hr.transpose() * &theta4;
    let theta2_b = factor_rrr.solve_vec(&u)?.dot(&u);

    let khh_inv_rhh = factor_khh.solve_mat(&r_hh)?;
    let khh_inv_rbar = factor_khh.solve_mat(&r_bar)?;
    let theta3_a = trace_product(&khh_inv_rhh, &khh_inv_rbar);
    // K⁻¹ R̄ K⁻¹ via a second solve on the (symmetric) transposed product.
    let w2 = factor_khh.solve_mat(&khh_inv_rbar.transpose())?;
    let p = &r_hr * factor_rrr.solve_mat(&r_hr.transpose())?;
    let theta3_b = trace_product(&p, &w2);

    let big_c_raw = theta1.transpose() * &r_bar * &theta1;
    let half = S::lit(0.5);
    let big_c = (&big_c_raw + big_c_raw.transpose()) * half;

    let w_mean = factor_k.solve_vec(&(&k_rh * &theta4))?;

    for (v, what) in [
        (theta2_a, "theta2_a"),
        (theta2_b, "theta2_b"),
        (theta3_a, "theta3_a"),
        (theta3_b, "theta3_b"),
    ] {
        if !v.is_finite() {
            return Err(Error::NonFinite(match what {
                "theta2_a" => "cached theta2_a",
                "theta2_b" => "cached theta2_b",
                "theta3_a" => "cached theta3_a",
                _ => "cached theta3_b",
            }));
        }
    }

    let phi_context: Vec<S> = d1
        .contexts()
        .iter()
        .map(|si| kernel_eval(&kernels.k_s, si, s_t))
        .collect::<Result<_>>()?;
    let k_ss_query = kernel_eval(&kernels.k_s, s_t, s_t)?;

    Ok(RoundState {
        contexts: d1.contexts().to_vec(),
        actions: d1.actions().to_vec(),
        r_hat,
        s_t: s_t.to_vec(),
        kernels: *kernels,
        phi_context,
        factor_k,
        factor_khh,
        factor_rrr,
        f_posterior,
        w_mean,
        big_c,
        theta1,
        theta4,
        theta2_a,
        theta2_b,
        theta3_a,
        theta3_b,
        k_ss_query,
        clamp_count: AtomicUsize::new(0),
    })
}

/// `tr(A B)` without forming the product.
fn trace_product<S: Scalar>(a: &DMatrix<S>, b: &DMatrix<S>) -> S {
    debug_assert_eq!(a.ncols(), b.nrows());
    debug_assert_eq!(a.nrows(), b.ncols());
    let mut acc = S::zero();
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            acc += a[(i, j)] * b[(j, i)];
        }
    }
    acc
}

impl<S: Scalar> RoundState<S> {
    fn features(&self, a: &[S]) -> Result<DVector<S>> {
        let n = self.contexts.len();
        let mut out = DVector::zeros(n);
        for i in 0..n {
            out[i] = self.phi_context[i] * kernel_eval(&self.kernels.k_a, &self.actions[i], a)?;
        }
        Ok(out)
    }

    /// Posterior mean `m₃(a)`.
    pub fn mean(&self, a: &[S]) -> Result<S> {
        Ok(self.features(a)?.dot(&self.w_mean))
    }

    /// Posterior covariance `κ(a, a′)`.
    pub fn cov(&self, a: &[S], a_prime: &[S]) -> Result<S> {
        let phi_a = self.features(a)?;
        let phi_b = self.features(a_prime)?;
        let w_b = self.factor_k.solve_vec(&phi_b)?;
        let w_a = self.factor_k.solve_vec(&phi_a)?;
        let term1 = (&self.big_c * &w_b).dot(&w_a);
        let f = self.k_ss_query * kernel_eval(&self.kernels.k_a, a, a_prime)?;
        let g = phi_a.dot(&w_b);
        Ok(term1 + (self.theta2_a + self.theta3_a) * f - (self.theta2_b + self.theta3_b) * g)
    }

    /// Posterior standard deviation `√max(κ(a,a), 0)`; a negative κ is
    /// clamped to zero and counted in [`Self::clamp_count`].
    pub fn stddev(&self, a: &[S]) -> Result<S> {
        let v = self.cov(a, a)?;
        Ok(self.clamped_sqrt(v))
    }

    fn clamped_sqrt(&self, v: S) -> S {
        if v < S::zero() {
            self.clamp_count.fetch_add(1, Ordering::Relaxed);
            S::zero()
        } else {
            v.sqrt()
        }
    }

    /// How many variance evaluations were clamped up from a negative value.
    pub fn clamp_count(&self) -> usize {
        self.clamp_count.load(Ordering::Relaxed)
    }

    /// Mean and stddev across a whole action grid, sharing one backsolve.
    /// Agrees with per-action [`Self::mean`]/[`Self::stddev`] queries.
    pub fn stats(&self, actions: &[Vec<S>]) -> Result<PosteriorStats<S>> {
        let phi = joint_feature_matrix(
            &self.contexts,
            &self.actions,
            &self.kernels.k_s,
            &self.kernels.k_a,
            &self.s_t,
            actions,
        )?;
        let w = self.factor_k.solve_mat(&phi)?;
        let cw = &self.big_c * &w;
        let mut means = Vec::with_capacity(actions.len());
        let mut stds = Vec::with_capacity(actions.len());
        let t2_plus_t3 = self.theta2_a + self.theta3_a;
        let t2b_plus_t3b = self.theta2_b + self.theta3_b;
        for (j, a) in actions.iter().enumerate() {
            let phi_j = phi.column(j);
            let w_j = w.column(j);
            means.push(phi_j.dot(&self.w_mean));
            let term1 = w_j.dot(&cw.column(j));
            let f = self.k_ss_query * kernel_eval(&self.kernels.k_a, a, a)?;
            let g = phi_j.dot(&w_j);
            let v = term1 + t2_plus_t3 * f - t2b_plus_t3b * g;
            stds.push(self.clamped_sqrt(v));
        }
        PosteriorStats::new(means, stds)
    }

    /// `Θ₁ = K_{r̂r̂}⁻¹ R_{r̂ r} R_{rr}⁻¹ K_{rr}` (|r̂| × |D₁|).
    pub fn theta1(&self) -> &DMatrix<S> {
        &self.theta1
    }

    /// `Θ₄ = K_{r̂r̂}⁻¹ R_{r̂ r̃} (R_{r̃r̃} + λ_f I)⁻¹ y` (length |r̂|).
    pub fn theta4(&self) -> &DVector<S> {
        &self.theta4
    }

    pub fn theta2_a(&self) -> S {
        self.theta2_a
    }

    pub fn theta2_b(&self) -> S {
        self.theta2_b
    }

    pub fn theta3_a(&self) -> S {
        self.theta3_a
    }

    pub fn theta3_b(&self) -> S {
        self.theta3_b
    }

    /// The concatenated intermediate rewards `r̂ = (r, r̃)`.
    pub fn r_hat(&self) -> &[Vec<S>] {
        &self.r_hat
    }

    /// Posterior of `f` fitted on D₂ (the source of `R̄`).
    pub fn f_posterior(&self) -> &FPosterior<S> {
        &self.f_posterior
    }

    /// Escalation jitter added to the `K_{r̂r̂}` factorization, if any.
    pub fn khh_escalation_jitter(&self) -> S {
        self.factor_khh.jitter_added()
    }

    /// Escalation jitter added to the `R_{rr}` factorization, if any.
    pub fn rrr_escalation_jitter(&self) -> S {
        self.factor_rrr.jitter_added()
    }
}
