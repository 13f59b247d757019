//! Baseline estimator: contextualized conditional-mean-embedding UCB
//! statistics over the matched dataset D₁.
//!
//! The per-action posterior mean chains the joint context-action features
//! through the embedding regression,
//! `μ(a) = Φ(s_t,a)ᵀ (K + λI)⁻¹ K_{r r̃} (K_{r̃r̃} + λ_f I)⁻¹ y`
//! with `K = K_ss ⊙ K_aa`, and the standard deviation is
//! `σ(a) = λ^{-1/2} √(k_s(s_t,s_t) k_a(a,a) − Φᵀ (K + λI)⁻¹ Φ)`.
//!
//! The leading variance term uses the exact joint kernel value, which makes
//! the radicand the standard nonnegative GP posterior variance. The
//! finite-feature alternative `Φᵀ Φ` (a dot product that grows with |D₁|)
//! is kept as a clearly named diagnostic variant because it changes the
//! exploration behaviour materially; see [`CmeRoundState::stddev_finite_feature`].

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::kernels::{cross_gram, gram, hadamard, kernel_eval, KernelSet, KernelSpec};
use crate::linalg::SpdFactor;
use crate::scalar::Scalar;
use crate::gp::UnmatchedDataset;
use crate::policies::PosteriorStats;

/// The matched dataset D₁: one (context, action, intermediate reward) triple
/// per round.
#[derive(Debug, Clone, Default)]
pub struct MatchedDataset<S: Scalar> {
    contexts: Vec<Vec<S>>,
    actions: Vec<Vec<S>>,
    rewards: Vec<Vec<S>>,
}

impl<S: Scalar> MatchedDataset<S> {
    pub fn new() -> Self {
        Self { contexts: Vec::new(), actions: Vec::new(), rewards: Vec::new() }
    }

    /// Appends one triple, validating finiteness and dimensional consistency
    /// with the rows already present.
    pub fn push(&mut self, context: Vec<S>, action: Vec<S>, reward: Vec<S>) -> Result<()> {
        for (v, what) in [(&context, "context"), (&action, "action"), (&reward, "reward")] {
            if v.is_empty() {
                return Err(Error::EmptyInput("matched triple component"));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite(match what {
                    "context" => "matched context",
                    "action" => "matched action",
                    _ => "matched reward",
                }));
            }
        }
        for (stored, incoming) in [
            (self.contexts.first(), &context),
            (self.actions.first(), &action),
            (self.rewards.first(), &reward),
        ] {
            if let Some(first) = stored {
                if first.len() != incoming.len() {
                    return Err(Error::DimensionMismatch {
                        expected: first.len(),
                        got: incoming.len(),
                    });
                }
            }
        }
        self.contexts.push(context);
        self.actions.push(action);
        self.rewards.push(reward);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.contexts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.contexts.is_empty()
    }

    pub fn contexts(&self) -> &[Vec<S>] {
        &self.contexts
    }

    pub fn actions(&self) -> &[Vec<S>] {
        &self.actions
    }

    pub fn rewards(&self) -> &[Vec<S>] {
        &self.rewards
    }
}

/// Joint context-action feature vector: entry `i = k_s(s_i, s) · k_a(a_i, a)`.
pub fn joint_features<S: Scalar>(
    d1: &MatchedDataset<S>,
    k_s: &KernelSpec<S>,
    k_a: &KernelSpec<S>,
    s: &[S],
    a: &[S],
) -> Result<DVector<S>> {
    if d1.is_empty() {
        return Err(Error::EmptyInput("joint_features on empty matched dataset"));
    }
    let n = d1.len();
    let mut out = DVector::zeros(n);
    for i in 0..n {
        out[i] =
            kernel_eval(k_s, &d1.contexts()[i], s)? * kernel_eval(k_a, &d1.actions()[i], a)?;
    }
    Ok(out)
}

/// Builds the joint feature matrix for a whole action grid (one column per
/// action), factoring out the context evaluations shared across columns.
pub(crate) fn joint_feature_matrix<S: Scalar>(
    contexts: &[Vec<S>],
    data_actions: &[Vec<S>],
    k_s: &KernelSpec<S>,
    k_a: &KernelSpec<S>,
    s: &[S],
    actions: &[Vec<S>],
) -> Result<DMatrix<S>> {
    if contexts.is_empty() {
        return Err(Error::EmptyInput("joint_features on empty matched dataset"));
    }
    if actions.is_empty() {
        return Err(Error::EmptyInput("action grid"));
    }
    let n = contexts.len();
    let ks_col: Vec<S> = contexts.iter().map(|si| kernel_eval(k_s, si, s)).collect::<Result<_>>()?;
    let mut out = DMatrix::zeros(n, actions.len());
    for (j, a) in actions.iter().enumerate() {
        for i in 0..n {
            out[(i, j)] = ks_col[i] * kernel_eval(k_a, &data_actions[i], a)?;
        }
    }
    Ok(out)
}

fn check_positive<S: Scalar>(value: S, what: &str) -> Result<()> {
    if !(value.is_finite() && value > S::zero()) {
        return Err(Error::InvalidParameter(format!("{what} must be positive, got {value:?}")));
    }
    Ok(())
}

/// Per-round cache for the baseline: the `(K + λI)` factorization shared by
/// all action queries, the mean weight vector, and the query context.
pub struct CmeRoundState<S: Scalar> {
    contexts: Vec<Vec<S>>,
    actions: Vec<Vec<S>>,
    factor: SpdFactor<S>,
    /// `(K + λI)⁻¹ K_{r r̃} (K_{r̃r̃} + λ_f I)⁻¹ y`.
    w_mean: DVector<S>,
    lambda: S,
    k_ss_query: S,
    s_t: Vec<S>,
    kernels: KernelSet<S>,
}

/// Builds the round state from both datasets at the query context `s_t`.
pub fn build_cme_round<S: Scalar>(
    d1: &MatchedDataset<S>,
    d2: &UnmatchedDataset<S>,
    kernels: &KernelSet<S>,
    lambda: S,
    lambda_f: S,
    s_t: &[S],
) -> Result<CmeRoundState<S>> {
    if d1.is_empty() {
        return Err(Error::EmptyInput("matched dataset"));
    }
    if d2.is_empty() {
        return Err(Error::EmptyInput("unmatched dataset"));
    }
    check_positive(lambda, "lambda")?;
    check_positive(lambda_f, "lambda_f")?;

    let k_ss = gram(&kernels.k_s, d1.contexts())?;
    let k_aa = gram(&kernels.k_a, d1.actions())?;
    let k = hadamard(&k_ss, &k_aa)?;
    let factor = SpdFactor::new(&k, lambda)?;

    let k_rt = cross_gram(&kernels.k_r, d1.rewards(), d2.points())?;
    let k_tt = gram(&kernels.k_r, d2.points())?;
    let alpha = SpdFactor::new(&k_tt, lambda_f)?.solve_vec(&d2.ys_vector())?;
    let w_mean = factor.solve_vec(&(&k_rt * alpha))?;

    let k_ss_query = kernel_eval(&kernels.k_s, s_t, s_t)?;
    Ok(CmeRoundState {
        contexts: d1.contexts().to_vec(),
        actions: d1.actions().to_vec(),
        factor,
        w_mean,
        lambda,
        k_ss_query,
        s_t: s_t.to_vec(),
        kernels: *kernels,
    })
}

impl<S: Scalar> CmeRoundState<S> {
    fn features(&self, a: &[S]) -> Result<DVector<S>> {
        let n = self.contexts.len();
        let mut out = DVector::zeros(n);
        for i in 0..n {
            out[i] = kernel_eval(&self.kernels.k_s, &self.contexts[i], &self.s_t)?
                * kernel_eval(&self.kernels.k_a, &self.actions[i], a)?;
        }
        Ok(out)
    }

    /// Posterior mean at action `a`.
    pub fn mean(&self, a: &[S]) -> Result<S> {
        Ok(self.features(a)?.dot(&self.w_mean))
    }

    /// Posterior standard deviation at action `a` (exact-kernel leading term).
    pub fn stddev(&self, a: &[S]) -> Result<S> {
        let phi = self.features(a)?;
        let solved = self.factor.solve_vec(&phi)?;
        let leading = self.k_ss_query * kernel_eval(&self.kernels.k_a, a, a)?;
        let g = leading - phi.dot(&solved);
        Ok((g.max(S::zero()) / self.lambda).sqrt())
    }

    /// Diagnostic variant of [`Self::stddev`] whose leading term is the
    /// finite-dimensional dot product `Φᵀ Φ` instead of the exact kernel
    /// value. The dot product grows with |D₁|, so this variant's radicand is
    /// not a GP posterior variance and the resulting σ keeps growing as data
    /// accumulates; it is retained to quantify that over-exploration.
    pub fn stddev_finite_feature(&self, a: &[S]) -> Result<S> {
        let phi = self.features(a)?;
        let solved = self.factor.solve_vec(&phi)?;
        let g = phi.dot(&phi) - phi.dot(&solved);
        Ok((g.max(S::zero()) / self.lambda).sqrt())
    }

    /// Mean and stddev across a whole action grid, sharing one factorization
    /// backsolve. Equal to calling [`Self::mean`]/[`Self::stddev`] per action.
    pub fn stats(&self, actions: &[Vec<S>]) -> Result<PosteriorStats<S>> {
        let phi = joint_feature_matrix(
            &self.contexts,
            &self.actions,
            &self.kernels.k_s,
            &self.kernels.k_a,
            &self.s_t,
            actions,
        )?;
        let solved = self.factor.solve_mat(&phi)?;
        let mut means = Vec::with_capacity(actions.len());
        let mut stds = Vec::with_capacity(actions.len());
        for (j, a) in actions.iter().enumerate() {
            let col = phi.column(j);
            means.push(col.dot(&self.w_mean));
            let leading = self.k_ss_query * kernel_eval(&self.kernels.k_a, a, a)?;
            let g = leading - col.dot(&solved.column(j));
            stds.push((g.max(S::zero()) / self.lambda).sqrt());
        }
        PosteriorStats::new(means, stds)
    }
}

/// One-shot posterior mean (see [`CmeRoundState::mean`] for the cached form).
pub fn cme_mean<S: Scalar>(
    d1: &MatchedDataset<S>,
    d2: &UnmatchedDataset<S>,
    kernels: &KernelSet<S>,
    lambda: S,
    lambda_f: S,
    s_t: &[S],
    a: &[S],
) -> Result<S> {
    build_cme_round(d1, d2, kernels, lambda, lambda_f, s_t)?.mean(a)
}

/// One-shot posterior standard deviation. Depends only on D₁'s contexts and
/// actions; intermediate rewards do not enter (and are not a parameter).
pub fn cme_stddev<S: Scalar>(
    d1: &MatchedDataset<S>,
    kernels: &KernelSet<S>,
    lambda: S,
    s_t: &[S],
    a: &[S],
) -> Result<S> {
    if d1.is_empty() {
        return Err(Error::EmptyInput("matched dataset"));
    }
    check_positive(lambda, "lambda")?;
    let k_ss = gram(&kernels.k_s, d1.contexts())?;
    let k_aa = gram(&kernels.k_a, d1.actions())?;
    let k = hadamard(&k_ss, &k_aa)?;
    let factor = SpdFactor::new(&k, lambda)?;
    let phi = joint_features(d1, &kernels.k_s, &kernels.k_a, s_t, a)?;
    let solved = factor.solve_vec(&phi)?;
    let leading = kernel_eval(&kernels.k_s, s_t, s_t)? * kernel_eval(&kernels.k_a, a, a)?;
    let g = leading - phi.dot(&solved);
    Ok((g.max(S::zero()) / lambda).sqrt())
}
